"""OpenQASM 2.0 emitter and parser.

The emitter produces deterministic text: header, qelib1 include, one gate
definition per distinct (subcircuit, inverted) pair, register declarations
(fixed names qr/cr), then statements in instruction order. Angles print
with 17 significant digits so text -> float -> text is lossless.

The parser is a hand-written lexer plus recursive descent over the QASM 2
subset the emitter uses, extended with the common qelib1 conveniences
(expression arithmetic with pi, parameterized gate definitions, multiple
registers, whole-register broadcast). Every failure raises a structured
QasmError carrying line/column; arbitrary byte input never escapes as an
unstructured exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import defects
from .circuit import Circuit, Composite, Gate, Instruction, Measure, Symbol
from .errors import MorphqError
from .gates import build_gate_catalog

HEADER = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'


class QasmError(MorphqError):
    """Base class for QASM emitter/parser failures."""


class QasmParseError(QasmError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class UnknownGate(QasmParseError):
    pass


class ArityMismatch(QasmParseError):
    pass


class DuplicateGateDef(QasmParseError):
    pass


class UnrepresentableConstruct(QasmError):
    """The circuit contains a construct OpenQASM 2.0 cannot express."""


# ---------------------------------------------------------------------------
# Emitter
# ---------------------------------------------------------------------------


def _fmt_angle(value) -> str:
    if isinstance(value, Symbol):
        raise UnrepresentableConstruct(
            f"cannot emit unbound symbolic parameter '{value.name}'"
        )
    return format(float(value), ".17g")


def _def_body_lines(sub: Circuit, formals: list[str]) -> list[str]:
    lines = []
    for ins in sub.instructions:
        if isinstance(ins, Measure):
            raise UnrepresentableConstruct("gate definitions cannot contain measurements")
        if isinstance(ins, Composite):
            raise UnrepresentableConstruct(
                "nested subcircuit references are not representable in a gate body"
            )
        params = ""
        if ins.params:
            params = "(" + ",".join(_fmt_angle(p) for p in ins.params) + ")"
        args = ",".join(formals[q] for q in ins.qubits)
        lines.append(f"  {ins.name}{params} {args};")
    return lines


def emit(c: Circuit) -> str:
    """Serialize a circuit to OpenQASM 2.0 text.

    Composites referencing subcircuits with classical bits are rejected
    here (UnrepresentableConstruct): QASM gate bodies are purely quantum.
    """
    from .circuit import inverse_circuit

    defs: list[str] = []
    def_names: dict[tuple[str, bool], str] = {}
    declared: set[str] = set()
    for ins in c.instructions:
        if not isinstance(ins, Composite):
            continue
        if ins.clbits and not defects.enabled(defects.QASM_COMPOSITE_CLBIT_ARGS):
            raise UnrepresentableConstruct(
                f"cannot represent subcircuit '{ins.ref}' with classical bits "
                f"in OpenQASM 2.0"
            )
        key = (ins.ref, ins.inverted)
        if key in def_names:
            continue
        sub = c.subcircuits[ins.ref]
        name = ins.ref
        if ins.inverted and not defects.enabled(defects.QASM_DUPLICATE_GATE_DEF):
            name = ins.ref + "_dg"
        def_names[key] = name
        body = inverse_circuit(sub) if ins.inverted else sub
        formals = [f"q{i}" for i in range(sub.n_qubits)]
        lines = [f"gate {name} {','.join(formals)} {{"]
        lines.extend(_def_body_lines(body, formals))
        lines.append("}")
        defs.append("\n".join(lines))
        declared.add(name)

    out = [HEADER.rstrip("\n")]
    out.extend(defs)
    if c.n_qubits:
        out.append(f"qreg qr[{c.n_qubits}];")
    if c.n_clbits:
        out.append(f"creg cr[{c.n_clbits}];")
    for ins in c.instructions:
        if isinstance(ins, Measure):
            out.append(f"measure qr[{ins.qubit}] -> cr[{ins.clbit}];")
        elif isinstance(ins, Gate):
            params = ""
            if ins.params:
                params = "(" + ",".join(_fmt_angle(p) for p in ins.params) + ")"
            args = ",".join(f"qr[{q}]" for q in ins.qubits)
            out.append(f"{ins.name}{params} {args};")
        else:
            args = [f"qr[{q}]" for q in ins.qubits]
            args.extend(f"cr[{b}]" for b in ins.clbits)
            out.append(f"{def_names[(ins.ref, ins.inverted)]} {','.join(args)};")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_KEYWORDS = {"OPENQASM", "include", "qreg", "creg", "gate", "measure", "pi"}
_PUNCT = {";", ",", "(", ")", "{", "}", "[", "]", "+", "-", "*", "/"}


@dataclass(frozen=True)
class _Token:
    kind: str  # 'id', 'kw', 'num', 'str', 'punct', 'arrow', 'eof'
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == "-" and text.startswith("->", i):
            tokens.append(_Token("arrow", "->", start_line, start_col))
            i += 2
            col += 2
            continue
        if ch in _PUNCT:
            tokens.append(_Token("punct", ch, start_line, start_col))
            i += 1
            col += 1
            continue
        if ch == '"':
            j = i + 1
            while j < n and text[j] not in '"\n':
                j += 1
            if j >= n or text[j] != '"':
                raise QasmParseError("unterminated string literal", start_line, start_col)
            tokens.append(_Token("str", text[i + 1 : j], start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = seen_exp = False
            while j < n:
                cj = text[j]
                if cj.isdigit():
                    j += 1
                elif cj == "." and not seen_dot and not seen_exp:
                    seen_dot = True
                    j += 1
                elif cj in "eE" and not seen_exp and j > i:
                    seen_exp = True
                    j += 1
                    if j < n and text[j] in "+-":
                        j += 1
                else:
                    break
            lexeme = text[i:j]
            try:
                float(lexeme)
            except ValueError:
                raise QasmParseError(f"malformed number '{lexeme}'", start_line, start_col)
            tokens.append(_Token("num", lexeme, start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            lexeme = text[i:j]
            kind = "kw" if lexeme in _KEYWORDS else "id"
            tokens.append(_Token(kind, lexeme, start_line, start_col))
            col += j - i
            i = j
            continue
        raise QasmParseError(f"unexpected character {ch!r}", start_line, start_col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

# qelib1 names that map onto catalog gates with adapted parameters.
_ALIASES = {
    "u1": ("p", 1, lambda ps: ps),
    "u2": ("u", 2, lambda ps: (math.pi / 2, ps[0], ps[1])),
    "u3": ("u", 3, lambda ps: ps),
    "cu1": ("cp", 1, lambda ps: ps),
    "cu3": ("cu", 3, lambda ps: (ps[0], ps[1], ps[2], 0.0)),
}


@dataclass(frozen=True)
class _GateDef:
    name: str
    params: tuple[str, ...]
    qargs: tuple[str, ...]
    body: tuple  # (gate_name, param_exprs, arg_names) triples
    line: int


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.qregs: dict[str, tuple[int, int]] = {}  # name -> (offset, size)
        self.cregs: dict[str, tuple[int, int]] = {}
        self.defs: dict[str, _GateDef] = {}
        self.instructions: list[Instruction] = []
        self.subcircuits: dict[str, Circuit] = {}
        self._instantiated: dict[tuple[str, tuple[float, ...]], str] = {}

    # token helpers ---------------------------------------------------------

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> _Token:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            raise QasmParseError(f"expected {want!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def fail(self, message: str, tok: _Token, cls=QasmParseError):
        raise cls(message, tok.line, tok.col)

    # grammar ---------------------------------------------------------------

    def parse(self) -> Circuit:
        tok = self.peek()
        if tok.kind != "kw" or tok.text != "OPENQASM":
            self.fail("expected 'OPENQASM 2.0;' header", tok)
        self.next()
        ver = self.expect("num")
        if ver.text != "2.0":
            self.fail(f"unsupported OPENQASM version '{ver.text}'", ver)
        self.expect("punct", ";")
        while self.peek().kind == "kw" and self.peek().text == "include":
            self.next()
            self.expect("str")
            self.expect("punct", ";")
        while self.peek().kind != "eof":
            self.statement()
        n_qubits = sum(size for _, size in self.qregs.values())
        n_clbits = sum(size for _, size in self.cregs.values())
        try:
            return Circuit(n_qubits, n_clbits, tuple(self.instructions), self.subcircuits)
        except MorphqError as exc:
            raise QasmParseError(f"invalid circuit: {exc}", 1, 1) from exc

    def statement(self) -> None:
        tok = self.peek()
        if tok.kind == "kw":
            if tok.text in ("qreg", "creg"):
                return self.register_decl()
            if tok.text == "gate":
                return self.gate_def()
            if tok.text == "measure":
                return self.measure_stmt()
            self.fail(f"unexpected keyword '{tok.text}'", tok)
        if tok.kind == "id":
            return self.gate_application()
        self.fail(f"unexpected token {tok.text!r}", tok)

    def register_decl(self) -> None:
        kw = self.next()
        name = self.expect("id")
        self.expect("punct", "[")
        size_tok = self.expect("num")
        self.expect("punct", "]")
        self.expect("punct", ";")
        try:
            size = int(size_tok.text)
        except ValueError:
            self.fail(f"register size must be an integer, got '{size_tok.text}'", size_tok)
        if size < 1:
            self.fail(f"register size must be positive, got {size}", size_tok)
        table = self.qregs if kw.text == "qreg" else self.cregs
        if name.text in self.qregs or name.text in self.cregs:
            self.fail(f"duplicate register name '{name.text}'", name)
        offset = sum(s for _, s in table.values())
        table[name.text] = (offset, size)

    def gate_def(self) -> None:
        self.next()  # 'gate'
        name_tok = self.expect("id")
        name = name_tok.text
        if name in self.defs:
            self.fail(f"Duplicate declaration for gate '{name}'", name_tok, DuplicateGateDef)
        params: list[str] = []
        if self.peek().kind == "punct" and self.peek().text == "(":
            self.next()
            if not (self.peek().kind == "punct" and self.peek().text == ")"):
                params.append(self.expect("id").text)
                while self.peek().text == ",":
                    self.next()
                    params.append(self.expect("id").text)
            self.expect("punct", ")")
        qargs = [self.expect("id").text]
        while self.peek().text == ",":
            self.next()
            qargs.append(self.expect("id").text)
        if len(set(qargs)) != len(qargs):
            self.fail(f"duplicate formal argument in gate '{name}'", name_tok)
        self.expect("punct", "{")
        body = []
        while not (self.peek().kind == "punct" and self.peek().text == "}"):
            tok = self.peek()
            if tok.kind == "eof":
                self.fail(f"unterminated body of gate '{name}'", tok)
            if tok.kind == "kw" and tok.text == "measure":
                self.fail("measurements are not allowed inside gate definitions", tok)
            gname = self.next()
            if gname.kind not in ("id", "kw"):
                self.fail(f"expected gate name, found {gname.text!r}", gname)
            param_exprs: list = []
            if self.peek().text == "(":
                self.next()
                if self.peek().text != ")":
                    param_exprs.append(self.parse_expr(set(params)))
                    while self.peek().text == ",":
                        self.next()
                        param_exprs.append(self.parse_expr(set(params)))
                self.expect("punct", ")")
            args = [self.expect("id")]
            while self.peek().text == ",":
                self.next()
                args.append(self.expect("id"))
            self.expect("punct", ";")
            for arg in args:
                if arg.text not in qargs:
                    self.fail(
                        f"gate '{name}' body references unknown argument '{arg.text}'",
                        arg,
                    )
            body.append((gname, tuple(param_exprs), tuple(a.text for a in args)))
        self.expect("punct", "}")
        self.defs[name] = _GateDef(name, tuple(params), tuple(qargs), tuple(body), name_tok.line)

    def measure_stmt(self) -> None:
        self.next()
        src = self.register_arg(self.qregs, "quantum")
        self.expect("arrow")
        dst = self.register_arg(self.cregs, "classical")
        self.expect("punct", ";")
        if len(src) != len(dst):
            tok = self.peek()
            self.fail(
                f"measure width mismatch: {len(src)} qubits vs {len(dst)} clbits", tok
            )
        self.instructions.extend(Measure(q, c) for q, c in zip(src, dst))

    def register_arg(self, table: dict, kind: str) -> list[int]:
        name = self.expect("id")
        if name.text not in table:
            self.fail(f"'{name.text}' is not a declared {kind} register", name)
        offset, size = table[name.text]
        if self.peek().text == "[":
            self.next()
            idx_tok = self.expect("num")
            self.expect("punct", "]")
            try:
                idx = int(idx_tok.text)
            except ValueError:
                self.fail(f"register index must be an integer", idx_tok)
            if not 0 <= idx < size:
                self.fail(
                    f"index {idx} out of range for register '{name.text}' of size {size}",
                    idx_tok,
                )
            return [offset + idx]
        return list(range(offset, offset + size))

    def gate_application(self) -> None:
        name_tok = self.next()
        name = name_tok.text
        param_values: list[float] = []
        if self.peek().text == "(":
            self.next()
            if self.peek().text != ")":
                param_values.append(self.eval_expr(self.parse_expr(set()), {}))
                while self.peek().text == ",":
                    self.next()
                    param_values.append(self.eval_expr(self.parse_expr(set()), {}))
            self.expect("punct", ")")
        raw_args: list[tuple[_Token, list[int] | None]] = []
        while True:
            arg_tok = self.peek()
            if arg_tok.kind != "id":
                self.fail(f"expected register argument, found {arg_tok.text!r}", arg_tok)
            raw_args.append(self.any_register_arg())
            if self.peek().text != ",":
                break
            self.next()
        self.expect("punct", ";")
        self.apply_gate(name_tok, name, tuple(param_values), raw_args)

    def any_register_arg(self):
        """An argument that may name a quantum or classical register."""
        name = self.next()
        idx = None
        if self.peek().text == "[":
            self.next()
            idx_tok = self.expect("num")
            self.expect("punct", "]")
            try:
                idx = int(idx_tok.text)
            except ValueError:
                self.fail("register index must be an integer", idx_tok)
        return (name, idx)

    def _resolve_quantum(self, name_tok: _Token, idx: int | None) -> list[int]:
        if name_tok.text not in self.qregs:
            self.fail(f"'{name_tok.text}' is not a declared quantum register", name_tok)
        offset, size = self.qregs[name_tok.text]
        if idx is None:
            return list(range(offset, offset + size))
        if not 0 <= idx < size:
            self.fail(
                f"index {idx} out of range for register '{name_tok.text}' of size {size}",
                name_tok,
            )
        return [offset + idx]

    def apply_gate(self, name_tok, name, params, raw_args) -> None:
        if name in self.defs:
            return self.apply_defined(name_tok, self.defs[name], params, raw_args)
        catalog = build_gate_catalog()
        target, adapt = name, lambda ps: ps
        if name in _ALIASES:
            target, n_params, adapt = _ALIASES[name]
            if len(params) != n_params:
                self.fail(
                    f"gate '{name}' takes {n_params} parameters, got {len(params)}",
                    name_tok, ArityMismatch,
                )
        if target not in catalog:
            self.fail(f"Cannot find gate definition for '{name}'", name_tok, UnknownGate)
        spec = catalog[target]
        if name not in _ALIASES and len(params) != spec.param_count:
            self.fail(
                f"gate '{name}' takes {spec.param_count} parameters, got {len(params)}",
                name_tok, ArityMismatch,
            )
        qubit_groups = [self._resolve_quantum(tok, idx) for tok, idx in raw_args]
        for block in self._broadcast(name_tok, name, spec.arity, qubit_groups):
            self.instructions.append(Gate(spec.name, block, tuple(adapt(params))))

    def _broadcast(self, name_tok, name, arity, groups) -> list[tuple[int, ...]]:
        if len(groups) != arity:
            self.fail(
                f"'{name}' uses {len(groups)} qubits but is declared for {arity} qubits",
                name_tok, ArityMismatch,
            )
        widths = {len(g) for g in groups}
        if widths == {1}:
            return [tuple(g[0] for g in groups)]
        widths.discard(1)
        if len(widths) != 1:
            self.fail(f"mismatched register widths in '{name}' application", name_tok)
        width = widths.pop()
        expanded = [g * width if len(g) == 1 else g for g in groups]
        return [tuple(g[i] for g in expanded) for i in range(width)]

    def apply_defined(self, name_tok, gdef: _GateDef, params, raw_args) -> None:
        # Arg count is checked before register kinds: an application that
        # names classical bits fails here with the arity diagnostic.
        if len(raw_args) != len(gdef.qargs):
            self.fail(
                f"'{gdef.name}' uses {len(raw_args)} qubits but is declared for "
                f"{len(gdef.qargs)} qubits",
                name_tok, ArityMismatch,
            )
        if len(params) != len(gdef.params):
            self.fail(
                f"gate '{gdef.name}' takes {len(gdef.params)} parameters, "
                f"got {len(params)}",
                name_tok, ArityMismatch,
            )
        qubit_groups = [self._resolve_quantum(tok, idx) for tok, idx in raw_args]
        ref = self._instantiate(name_tok, gdef, params)
        for block in self._broadcast(name_tok, gdef.name, len(gdef.qargs), qubit_groups):
            self.instructions.append(Composite(ref, block))

    def _instantiate(self, name_tok, gdef: _GateDef, params: tuple[float, ...]) -> str:
        key = (gdef.name, params)
        if key in self._instantiated:
            return self._instantiated[key]
        env = dict(zip(gdef.params, params))
        pos = {q: i for i, q in enumerate(gdef.qargs)}
        body: list[Instruction] = []
        for gname_tok, param_exprs, arg_names in gdef.body:
            values = tuple(self.eval_expr(e, env) for e in param_exprs)
            body.extend(self._body_gate(gname_tok, values, tuple(pos[a] for a in arg_names)))
        name = gdef.name if not self._same_def_instantiated(gdef.name) else (
            f"{gdef.name}__{sum(1 for k in self._instantiated if k[0] == gdef.name) + 1}"
        )
        try:
            self.subcircuits[name] = Circuit(len(gdef.qargs), 0, tuple(body))
        except MorphqError as exc:
            raise QasmParseError(f"invalid gate body '{gdef.name}': {exc}",
                                 name_tok.line, name_tok.col) from exc
        self._instantiated[key] = name
        return name

    def _same_def_instantiated(self, name: str) -> bool:
        return any(k[0] == name for k in self._instantiated)

    def _body_gate(self, gname_tok, params, qubits) -> list[Gate]:
        """Resolve one gate inside a definition body (defs may call defs)."""
        name = gname_tok.text
        if name in self.defs:
            inner = self.defs[name]
            if len(qubits) != len(inner.qargs):
                self.fail(
                    f"'{name}' uses {len(qubits)} qubits but is declared for "
                    f"{len(inner.qargs)} qubits",
                    gname_tok, ArityMismatch,
                )
            # Inline nested definition applications so stored bodies stay flat.
            env = dict(zip(inner.params, params))
            out: list[Gate] = []
            for tok, exprs, args in inner.body:
                vals = tuple(self.eval_expr(e, env) for e in exprs)
                pos = {q: i for i, q in enumerate(inner.qargs)}
                out.extend(
                    self._body_gate(tok, vals, tuple(qubits[pos[a]] for a in args))
                )
            return out
        catalog = build_gate_catalog()
        target, adapt = name, lambda ps: ps
        if name in _ALIASES:
            target, n_params, adapt = _ALIASES[name]
            if len(params) != n_params:
                self.fail(f"gate '{name}' takes {n_params} parameters", gname_tok,
                          ArityMismatch)
        if target not in catalog:
            self.fail(f"Cannot find gate definition for '{name}'", gname_tok, UnknownGate)
        spec = catalog[target]
        if name not in _ALIASES and len(params) != spec.param_count:
            self.fail(
                f"gate '{name}' takes {spec.param_count} parameters, got {len(params)}",
                gname_tok, ArityMismatch,
            )
        if len(qubits) != spec.arity:
            self.fail(
                f"'{name}' uses {len(qubits)} qubits but is declared for "
                f"{spec.arity} qubits",
                gname_tok, ArityMismatch,
            )
        return [Gate(spec.name, qubits, tuple(adapt(params)))]

    # expressions -----------------------------------------------------------

    def parse_expr(self, formals: set[str]):
        """Parse an angle expression into a small AST tuple."""
        node = self.parse_term(formals)
        while self.peek().text in ("+", "-"):
            op = self.next().text
            node = (op, node, self.parse_term(formals))
        return node

    def parse_term(self, formals: set[str]):
        node = self.parse_unary(formals)
        while self.peek().text in ("*", "/"):
            op = self.next().text
            node = (op, node, self.parse_unary(formals))
        return node

    def parse_unary(self, formals: set[str]):
        tok = self.peek()
        if tok.text == "-":
            self.next()
            return ("neg", self.parse_unary(formals))
        if tok.text == "+":
            self.next()
            return self.parse_unary(formals)
        if tok.text == "(":
            self.next()
            node = self.parse_expr(formals)
            self.expect("punct", ")")
            return node
        if tok.kind == "num":
            self.next()
            return ("lit", float(tok.text))
        if tok.kind == "kw" and tok.text == "pi":
            self.next()
            return ("lit", math.pi)
        if tok.kind == "id":
            if tok.text in formals:
                self.next()
                return ("var", tok.text)
            self.fail(f"unknown name '{tok.text}' in expression", tok)
        self.fail(f"expected expression, found {tok.text!r}", tok)

    def eval_expr(self, node, env: dict[str, float]) -> float:
        op = node[0]
        if op == "lit":
            return node[1]
        if op == "var":
            return env[node[1]]
        if op == "neg":
            return -self.eval_expr(node[1], env)
        a, b = self.eval_expr(node[1], env), self.eval_expr(node[2], env)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if b == 0:
            raise QasmParseError("division by zero in angle expression", 1, 1)
        return a / b


def parse(text: str) -> Circuit:
    """Parse OpenQASM 2.0 text into a circuit.

    Raises QasmParseError (with line/column) and its subclasses UnknownGate,
    ArityMismatch, and DuplicateGateDef.
    """
    if not isinstance(text, str):
        raise QasmParseError("input must be text", 1, 1)
    return _Parser(text).parse()
