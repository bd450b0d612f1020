"""Java lexer and parser producing a concrete syntax tree.

This is the default parser adapter behind the structural-summary machinery.
It is a tolerant recursive-descent parser: node categories follow the
tree-sitter-java naming scheme (class_declaration, if_statement, ...), and
unparseable stretches become ERROR nodes instead of raising, so slightly
malformed translation inputs still yield usable trees.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class SyntaxNode:
    """One node of the concrete parse tree.

    ``span`` is a half-open (start, end) pair of byte offsets into the
    UTF-8 encoding of the source. Terminal nodes have no children.
    """

    category: str
    children: list["SyntaxNode"] = field(default_factory=list)
    is_terminal: bool = False
    span: tuple[int, int] = (0, 0)

    def walk(self):
        """Yield this node and all descendants in DFS pre-order."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while true false null""".split()
)

PRIMITIVE_TYPES = {
    "byte": "integral_type",
    "short": "integral_type",
    "int": "integral_type",
    "long": "integral_type",
    "char": "integral_type",
    "float": "floating_point_type",
    "double": "floating_point_type",
    "boolean": "boolean_type",
    "void": "void_type",
}

MODIFIER_KEYWORDS = frozenset(
    """public protected private static final abstract native synchronized
    transient volatile strictfp default""".split()
)

# '<' and '>' are always lexed alone (except '<=' / '>=') so that nested
# generics like List<List<String>> are not glued into shift operators.
_MULTI_OPS = (
    "...",
    "->",
    "::",
    "==",
    "!=",
    "<=",
    ">=",
    "&&",
    "||",
    "++",
    "--",
    "+=",
    "-=",
    "*=",
    "/=",
    "%=",
    "&=",
    "|=",
    "^=",
)

_SINGLE_OPS = set("{}()[];,.@?:=+-*/%&|^!~<>")


@dataclass
class Token:
    kind: str
    text: str
    start: int  # char offset
    end: int


class _Lexer:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0
        self.n = len(source)

    def tokens(self) -> list[Token]:
        out = []
        while True:
            self._skip_trivia()
            if self.pos >= self.n:
                break
            tok = self._next_token()
            if tok is not None:
                out.append(tok)
        return out

    def _skip_trivia(self):
        src, n = self.src, self.n
        while self.pos < n:
            ch = src[self.pos]
            if ch.isspace():
                self.pos += 1
            elif ch == "/" and self.pos + 1 < n and src[self.pos + 1] == "/":
                nl = src.find("\n", self.pos)
                self.pos = n if nl < 0 else nl + 1
            elif ch == "/" and self.pos + 1 < n and src[self.pos + 1] == "*":
                close = src.find("*/", self.pos + 2)
                self.pos = n if close < 0 else close + 2
            else:
                return

    def _next_token(self) -> Token | None:
        src, start = self.src, self.pos
        ch = src[start]

        if ch.isalpha() or ch in "_$":
            self.pos += 1
            while self.pos < self.n and (src[self.pos].isalnum() or src[self.pos] in "_$"):
                self.pos += 1
            text = src[start : self.pos]
            kind = text if text in KEYWORDS else "identifier"
            return Token(kind, text, start, self.pos)

        if ch.isdigit() or (ch == "." and start + 1 < self.n and src[start + 1].isdigit()):
            return self._number(start)

        if src.startswith('"""', start):
            return self._text_block(start)
        if ch == '"':
            return self._quoted(start, '"', "string_literal")
        if ch == "'":
            return self._quoted(start, "'", "character_literal")

        for op in _MULTI_OPS:
            if src.startswith(op, start):
                self.pos = start + len(op)
                return Token(op, op, start, self.pos)
        if ch in _SINGLE_OPS:
            self.pos = start + 1
            return Token(ch, ch, start, self.pos)

        # Unknown byte: emit as a one-char ERROR terminal so parsing continues.
        self.pos = start + 1
        return Token("ERROR", ch, start, self.pos)

    def _number(self, start: int) -> Token:
        src, n = self.src, self.n
        i = start
        kind = "decimal_integer_literal"
        if src.startswith(("0x", "0X"), i):
            i += 2
            while i < n and (src[i] in "0123456789abcdefABCDEF_"):
                i += 1
            kind = "hex_integer_literal"
        elif src.startswith(("0b", "0B"), i):
            i += 2
            while i < n and src[i] in "01_":
                i += 1
            kind = "binary_integer_literal"
        else:
            while i < n and (src[i].isdigit() or src[i] == "_"):
                i += 1
            if i < n and src[i] == "." and not src.startswith("...", i):
                kind = "decimal_floating_point_literal"
                i += 1
                while i < n and (src[i].isdigit() or src[i] == "_"):
                    i += 1
            if i < n and src[i] in "eE":
                j = i + 1
                if j < n and src[j] in "+-":
                    j += 1
                if j < n and src[j].isdigit():
                    kind = "decimal_floating_point_literal"
                    i = j
                    while i < n and src[i].isdigit():
                        i += 1
        if i < n and src[i] in "fFdD":
            kind = "decimal_floating_point_literal"
            i += 1
        elif i < n and src[i] in "lL":
            i += 1
        self.pos = i
        return Token(kind, src[start:i], start, i)

    def _text_block(self, start: int) -> Token:
        close = self.src.find('"""', start + 3)
        end = self.n if close < 0 else close + 3
        self.pos = end
        return Token("text_block", self.src[start:end], start, end)

    def _quoted(self, start: int, quote: str, kind: str) -> Token:
        i = start + 1
        src, n = self.src, self.n
        while i < n:
            if src[i] == "\\":
                i += 2
            elif src[i] == quote or src[i] == "\n":
                i += 1
                break
            else:
                i += 1
        self.pos = min(i, n)
        return Token(kind, src[start : self.pos], start, self.pos)


def _byte_offsets(source: str) -> list[int]:
    """Prefix table mapping char index -> byte offset (UTF-8)."""
    if source.isascii():
        return list(range(len(source) + 1))
    offsets = [0]
    total = 0
    for ch in source:
        total += len(ch.encode("utf-8"))
        offsets.append(total)
    return offsets


class _Parser:
    """Recursive descent with index-based backtracking."""

    def __init__(self, tokens: list[Token], byte_of: list[int]):
        self.toks = tokens
        self.byte_of = byte_of
        self.pos = 0
        self.n = len(tokens)

    # -- token utilities -------------------------------------------------

    def peek(self, offset: int = 0) -> Token | None:
        i = self.pos + offset
        return self.toks[i] if i < self.n else None

    def at(self, kind: str, offset: int = 0) -> bool:
        t = self.peek(offset)
        return t is not None and t.kind == kind

    def eof(self) -> bool:
        return self.pos >= self.n

    def take(self) -> SyntaxNode:
        tok = self.toks[self.pos]
        self.pos += 1
        return self._leaf(tok)

    def take_if(self, kind: str) -> SyntaxNode | None:
        return self.take() if self.at(kind) else None

    def _leaf(self, tok: Token) -> SyntaxNode:
        span = (self.byte_of[tok.start], self.byte_of[tok.end])
        return SyntaxNode(tok.kind, [], True, span)

    def node(self, category: str, children: list[SyntaxNode]) -> SyntaxNode:
        children = [c for c in children if c is not None]
        if children:
            span = (children[0].span[0], children[-1].span[1])
        else:
            at = self.byte_of[self.toks[self.pos].start] if self.pos < self.n else self.byte_of[-1]
            span = (at, at)
        return SyntaxNode(category, children, not children, span)

    def error_until(self, sync: set[str], consume_sync: bool = True) -> SyntaxNode:
        """Consume tokens into an ERROR node until a sync token or EOF."""
        children = []
        while not self.eof() and not self.at_any(sync):
            children.append(self.take())
        if consume_sync and not self.eof():
            children.append(self.take())
        return self.node("ERROR", children)

    def at_any(self, kinds: set[str]) -> bool:
        t = self.peek()
        return t is not None and t.kind in kinds

    # -- entry point -----------------------------------------------------

    def parse_program(self) -> SyntaxNode:
        children = []
        while not self.eof():
            before = self.pos
            children.append(self.parse_top_level())
            if self.pos == before:  # safety: always make progress
                children.append(self.node("ERROR", [self.take()]))
        span = (children[0].span[0], children[-1].span[1]) if children else (0, 0)
        return SyntaxNode("program", children, False, span)

    def parse_top_level(self) -> SyntaxNode:
        if self.at("package"):
            return self._semicolon_run("package_declaration")
        if self.at("import"):
            return self._semicolon_run("import_declaration")
        if self.at(";"):
            return self.take()
        member = self.try_parse_member(in_class=False)
        if member is not None:
            return member
        return self.parse_statement()

    def _semicolon_run(self, category: str) -> SyntaxNode:
        children = [self.take()]
        while not self.eof() and not self.at(";"):
            children.append(self.take())
        if self.at(";"):
            children.append(self.take())
        return self.node(category, children)

    # -- declarations ----------------------------------------------------

    def parse_modifiers(self) -> SyntaxNode | None:
        children = []
        while True:
            t = self.peek()
            if t is None:
                break
            if t.kind == "@" and not self.at("interface", 1):
                children.append(self.parse_annotation())
            elif t.kind in MODIFIER_KEYWORDS:
                # 'default'/'synchronized' only act as modifiers before a member.
                if t.kind == "synchronized" and self.at("(", 1):
                    break
                if t.kind == "default" and (self.at(":", 1) or self.at("->", 1)):
                    break
                children.append(self.take())
            else:
                break
        if not children:
            return None
        return self.node("modifiers", children)

    def parse_annotation(self) -> SyntaxNode:
        children = [self.take()]  # '@'
        while self.at("identifier"):
            children.append(self.take())
            if self.at("."):
                children.append(self.take())
            else:
                break
        if self.at("("):
            children.append(self._balanced("annotation_argument_list", "(", ")"))
            return self.node("annotation", children)
        return self.node("marker_annotation", children)

    def _balanced(self, category: str, open_kind: str, close_kind: str) -> SyntaxNode:
        """Consume a balanced delimiter group shallowly (no inner structure)."""
        children = [self.take()]
        depth = 1
        while not self.eof() and depth > 0:
            if self.at(open_kind):
                depth += 1
            elif self.at(close_kind):
                depth -= 1
            children.append(self.take())
        return self.node(category, children)

    def try_parse_member(self, in_class: bool) -> SyntaxNode | None:
        """Class member or top-level declaration; None if not a declaration."""
        start = self.pos
        if self.at("static") and self.at("{", 1):
            kw = self.take()
            return self.node("static_initializer", [kw, self.parse_block()])
        if in_class and self.at("{"):
            return self.parse_block()

        mods = self.parse_modifiers()

        t = self.peek()
        if t is None:
            self.pos = start
            return None
        if t.kind == "class":
            return self.parse_class_like("class_declaration", mods)
        if t.kind == "interface":
            return self.parse_class_like("interface_declaration", mods)
        if t.kind == "enum":
            return self.parse_enum(mods)
        if t.kind == "@" and self.at("interface", 1):
            at, kw = self.take(), self.take()
            children = ([mods] if mods else []) + [at, kw]
            if self.at("identifier"):
                children.append(self.take())
            if self.at("{"):
                children.append(self._balanced("annotation_type_body", "{", "}"))
            return self.node("annotation_type_declaration", children)
        if (
            t.kind == "identifier"
            and t.text == "record"
            and self.at("identifier", 1)
            and self.at("(", 2)
        ):
            return self.parse_record(mods)

        # Constructor: bare identifier followed by '(' inside a class body.
        if in_class and t.kind == "identifier" and self.at("(", 1):
            return self.parse_constructor(mods)

        # Generic method: type parameters before the return type.
        type_params = None
        if self.at("<"):
            type_params = self._angle_group("type_parameters")
            if type_params is None:
                self.pos = start
                return None

        ty = self.try_parse_type()
        if ty is not None and self.at("identifier"):
            name = self.take()
            if self.at("("):
                return self.parse_method(mods, type_params, ty, name)
            if type_params is None:
                decl = self.parse_variable_rest(mods, ty, name, "field_declaration" if in_class else "local_variable_declaration")
                if decl is not None:
                    return decl

        self.pos = start
        if mods is not None or type_params is not None:
            # Modifiers with nothing valid after them: error recovery.
            return self.error_until({";", "}"})
        return None

    def parse_class_like(self, category: str, mods: SyntaxNode | None) -> SyntaxNode:
        children = [mods] if mods else []
        children.append(self.take())  # 'class' / 'interface'
        if self.at("identifier"):
            children.append(self.take())
        if self.at("<"):
            tp = self._angle_group("type_parameters")
            children.append(tp if tp is not None else self.error_until({"{", ";"}, consume_sync=False))
        while self.at("extends") or self.at("implements") or self.at("identifier"):
            # 'extends'/'implements' clauses, plus contextual 'permits'.
            if self.at("identifier") and self.peek().text != "permits":
                break
            kw = self.take()
            clause = [kw]
            while not self.eof() and not self.at("{") and not self.at_any({"extends", "implements", ";"}):
                clause.append(self.take())
            children.append(self.node("superclass" if kw.category == "extends" else "super_interfaces", clause))
        if self.at("{"):
            body_cat = "class_body" if category == "class_declaration" else "interface_body"
            children.append(self.parse_class_body(body_cat))
        else:
            children.append(self.error_until({";", "}"}))
        return self.node(category, children)

    def parse_record(self, mods: SyntaxNode | None) -> SyntaxNode:
        children = [mods] if mods else []
        children.append(self.take())  # 'record'
        children.append(self.take())  # name
        children.append(self.parse_formal_parameters())
        while not self.eof() and not self.at("{") and not self.at(";"):
            children.append(self.take())
        if self.at("{"):
            children.append(self.parse_class_body("class_body"))
        elif self.at(";"):
            children.append(self.take())
        return self.node("record_declaration", children)

    def parse_enum(self, mods: SyntaxNode | None) -> SyntaxNode:
        children = [mods] if mods else []
        children.append(self.take())  # 'enum'
        if self.at("identifier"):
            children.append(self.take())
        while not self.eof() and not self.at("{"):
            children.append(self.take())
        if self.at("{"):
            children.append(self.parse_enum_body())
        return self.node("enum_declaration", children)

    def parse_enum_body(self) -> SyntaxNode:
        children = [self.take()]  # '{'
        # Constant list runs until ';' or '}'.
        while not self.eof() and not self.at("}") and not self.at(";"):
            if self.at("identifier"):
                const = [self.take()]
                if self.at("("):
                    const.append(self._argument_group())
                if self.at("{"):
                    const.append(self.parse_class_body("class_body"))
                children.append(self.node("enum_constant", const))
            elif self.at(","):
                children.append(self.take())
            else:
                children.append(self.error_until({",", ";", "}"}, consume_sync=False))
                if self.at(","):
                    children.append(self.take())
        if self.at(";"):
            children.append(self.take())
            while not self.eof() and not self.at("}"):
                before = self.pos
                member = self.try_parse_member(in_class=True)
                children.append(member if member is not None else self.parse_statement())
                if self.pos == before:
                    children.append(self.node("ERROR", [self.take()]))
        if self.at("}"):
            children.append(self.take())
        return self.node("enum_body", children)

    def parse_class_body(self, category: str = "class_body") -> SyntaxNode:
        children = [self.take()]  # '{'
        while not self.eof() and not self.at("}"):
            before = self.pos
            if self.at(";"):
                children.append(self.take())
                continue
            member = self.try_parse_member(in_class=True)
            children.append(member if member is not None else self.parse_statement())
            if self.pos == before:
                children.append(self.node("ERROR", [self.take()]))
        if self.at("}"):
            children.append(self.take())
        return self.node(category, children)

    def parse_constructor(self, mods: SyntaxNode | None) -> SyntaxNode:
        children = [mods] if mods else []
        children.append(self.take())  # name
        children.append(self.parse_formal_parameters())
        if self.at("throws"):
            children.append(self._throws_clause())
        if self.at("{"):
            children.append(self.parse_block("constructor_body"))
        else:
            children.append(self.error_until({";", "}"}))
        return self.node("constructor_declaration", children)

    def parse_method(
        self,
        mods: SyntaxNode | None,
        type_params: SyntaxNode | None,
        return_type: SyntaxNode,
        name: SyntaxNode,
    ) -> SyntaxNode:
        children = [c for c in (mods, type_params, return_type, name) if c is not None]
        children.append(self.parse_formal_parameters())
        while self.at("[") and self.at("]", 1):  # legacy array dims after params
            children.append(self.take())
            children.append(self.take())
        if self.at("throws"):
            children.append(self._throws_clause())
        if self.at("{"):
            children.append(self.parse_block())
        elif self.at(";"):
            children.append(self.take())
        else:
            children.append(self.error_until({";", "}"}))
        return self.node("method_declaration", children)

    def _throws_clause(self) -> SyntaxNode:
        children = [self.take()]
        while not self.eof() and not self.at("{") and not self.at(";"):
            children.append(self.take())
        return self.node("throws", children)

    def parse_variable_rest(
        self,
        mods: SyntaxNode | None,
        ty: SyntaxNode,
        first_name: SyntaxNode,
        category: str,
    ) -> SyntaxNode | None:
        """Declarators after `type name`; None if this is not a declaration."""
        t = self.peek()
        if t is None or t.kind not in {"=", ";", ",", "["}:
            return None
        children = [c for c in (mods, ty) if c is not None]
        decl = [first_name]
        while self.at("[") and self.at("]", 1):
            decl.append(self.take())
            decl.append(self.take())
        if self.at("="):
            decl.append(self.take())
            decl.append(self.parse_expression({";", ","}, required=True))
        children.append(self.node("variable_declarator", decl))
        while self.at(","):
            children.append(self.take())
            if not self.at("identifier"):
                children.append(self.error_until({";", ","}, consume_sync=False))
                continue
            decl = [self.take()]
            while self.at("[") and self.at("]", 1):
                decl.append(self.take())
                decl.append(self.take())
            if self.at("="):
                decl.append(self.take())
                decl.append(self.parse_expression({";", ","}, required=True))
            children.append(self.node("variable_declarator", decl))
        if self.at(";"):
            children.append(self.take())
        else:
            children.append(self.error_until({";"}, consume_sync=True))
        return self.node(category, children)

    # -- types -----------------------------------------------------------

    def try_parse_type(self, allow_dims: bool = True) -> SyntaxNode | None:
        start = self.pos
        t = self.peek()
        if t is None:
            return None
        if t.kind in PRIMITIVE_TYPES:
            base = self.node(PRIMITIVE_TYPES[t.kind], [self.take()])
        elif t.kind == "identifier":
            base = self._named_type()
            if base is None:
                self.pos = start
                return None
        else:
            return None
        dims = []
        while allow_dims and self.at("[") and self.at("]", 1):
            dims.append(self.take())
            dims.append(self.take())
        if dims:
            base = self.node("array_type", [base, self.node("dimensions", dims)])
        return base

    def _named_type(self) -> SyntaxNode | None:
        leaf = self.toks[self.pos]
        self.pos += 1
        node = SyntaxNode(
            "type_identifier", [], True, (self.byte_of[leaf.start], self.byte_of[leaf.end])
        )
        while True:
            if self.at("<"):
                args = self._angle_group("type_arguments")
                if args is None:
                    return None
                node = self.node("generic_type", [node, args])
            if self.at(".") and self.at("identifier", 1):
                dot = self.take()
                ident = self.take()
                ident.category = "type_identifier"
                node = self.node("scoped_type_identifier", [node, dot, ident])
            else:
                break
        return node

    def _angle_group(self, category: str) -> SyntaxNode | None:
        """Balanced <...> holding only type-ish tokens; None on mismatch."""
        start = self.pos
        children = [self.take()]  # '<'
        depth = 1
        while not self.eof() and depth > 0:
            k = self.peek().kind
            if k == "<":
                depth += 1
            elif k == ">":
                depth -= 1
            elif k in {";", "{", "}", ")", "(", "=", "&&", "||", "+", "-", "string_literal"}:
                # Cannot occur inside type arguments: this '<' was a comparison.
                self.pos = start
                return None
            children.append(self.take())
        if depth > 0:
            self.pos = start
            return None
        return self.node(category, children)

    # -- parameters --------------------------------------------------------

    def parse_formal_parameters(self) -> SyntaxNode:
        sync = {")", "{", "}", ";"}
        children = [self.take()]  # '('
        while not self.eof() and not self.at_any(sync):
            param = self._formal_parameter()
            children.append(
                param
                if param is not None
                else self.error_until(sync | {","}, consume_sync=False)
            )
            if self.at(","):
                children.append(self.take())
        if self.at(")"):
            children.append(self.take())
        return self.node("formal_parameters", children)

    def _formal_parameter(self) -> SyntaxNode | None:
        start = self.pos
        mods = self.parse_modifiers()
        ty = self.try_parse_type()
        if ty is None:
            self.pos = start
            return None
        spread = None
        if self.at("..."):
            spread = self.take()
        if self.at("this"):  # receiver parameter
            name = self.take()
        elif self.at("identifier"):
            name = self.take()
        else:
            self.pos = start
            return None
        dims = []
        while self.at("[") and self.at("]", 1):
            dims.append(self.take())
            dims.append(self.take())
        children = [c for c in (mods, ty, spread, name) if c is not None] + dims
        return self.node("spread_parameter" if spread else "formal_parameter", children)

    def try_parse_strict_formal_parameters(self) -> SyntaxNode | None:
        """Strict variant for lambda parameter lists: every param is typed."""
        start = self.pos
        children = [self.take()]  # '('
        if self.at(")"):
            children.append(self.take())
            return self.node("formal_parameters", children)
        while True:
            param = self._formal_parameter()
            if param is None:
                self.pos = start
                return None
            children.append(param)
            if self.at(","):
                children.append(self.take())
                continue
            break
        if not self.at(")"):
            self.pos = start
            return None
        children.append(self.take())
        return self.node("formal_parameters", children)

    # -- statements --------------------------------------------------------

    def parse_block(self, category: str = "block") -> SyntaxNode:
        children = [self.take()]  # '{'
        while not self.eof() and not self.at("}"):
            before = self.pos
            children.append(self.parse_statement())
            if self.pos == before:
                children.append(self.node("ERROR", [self.take()]))
        if self.at("}"):
            children.append(self.take())
        return self.node(category, children)

    def parse_statement(self) -> SyntaxNode:
        t = self.peek()
        if t is None:
            return self.node("ERROR", [])
        kind = t.kind

        if kind == "{":
            return self.parse_block()
        if kind == ";":
            return self.take()
        if kind == "if":
            return self.parse_if()
        if kind == "while":
            kw = self.take()
            cond = self.parse_parenthesized()
            return self.node("while_statement", [kw, cond, self.parse_statement()])
        if kind == "do":
            kw = self.take()
            body = self.parse_statement()
            children = [kw, body]
            if self.at("while"):
                children.append(self.take())
                children.append(self.parse_parenthesized())
            if self.at(";"):
                children.append(self.take())
            return self.node("do_statement", children)
        if kind == "for":
            return self.parse_for()
        if kind == "switch":
            return self.parse_switch()
        if kind == "try":
            return self.parse_try()
        if kind == "return":
            kw = self.take()
            children = [kw]
            if not self.at(";"):
                children.append(self.parse_expression({";"}, required=True))
            if self.at(";"):
                children.append(self.take())
            return self.node("return_statement", children)
        if kind == "throw":
            kw = self.take()
            children = [kw, self.parse_expression({";"}, required=True)]
            if self.at(";"):
                children.append(self.take())
            return self.node("throw_statement", children)
        if kind in ("break", "continue"):
            kw = self.take()
            children = [kw]
            if self.at("identifier"):
                children.append(self.take())
            if self.at(";"):
                children.append(self.take())
            return self.node(f"{kind}_statement", children)
        if kind == "synchronized":
            kw = self.take()
            children = [kw]
            if self.at("("):
                children.append(self.parse_parenthesized())
            if self.at("{"):
                children.append(self.parse_block())
            return self.node("synchronized_statement", children)
        if kind == "assert":
            kw = self.take()
            children = [kw, self.parse_expression({";", ":"}, required=True)]
            if self.at(":"):
                children.append(self.take())
                children.append(self.parse_expression({";"}, required=True))
            if self.at(";"):
                children.append(self.take())
            return self.node("assert_statement", children)
        if kind == "identifier" and self.at(":", 1):
            label, colon = self.take(), self.take()
            return self.node("labeled_statement", [label, colon, self.parse_statement()])

        # Local declarations inside class bodies / blocks.
        member = self.try_parse_local_declaration()
        if member is not None:
            return member

        expr = self.parse_expression({";"}, required=True)
        children = [expr]
        if self.at(";"):
            children.append(self.take())
        return self.node("expression_statement", children)

    def try_parse_local_declaration(self) -> SyntaxNode | None:
        start = self.pos
        mods = self.parse_modifiers()
        ty = self.try_parse_type()
        if ty is not None and self.at("identifier"):
            name = self.take()
            decl = self.parse_variable_rest(mods, ty, name, "local_variable_declaration")
            if decl is not None:
                return decl
        if ty is not None and self.at("{") and mods is None:
            # Nested class-like tokens fall through elsewhere; not a declaration.
            pass
        self.pos = start
        # Local type declarations.
        mods = self.parse_modifiers()
        if self.at("class"):
            return self.parse_class_like("class_declaration", mods)
        if self.at("interface"):
            return self.parse_class_like("interface_declaration", mods)
        if self.at("enum"):
            return self.parse_enum(mods)
        self.pos = start
        return None

    def parse_if(self) -> SyntaxNode:
        kw = self.take()
        cond = self.parse_parenthesized()
        consequence = self.parse_statement()
        children = [kw, cond, consequence]
        if self.at("else"):
            children.append(self.take())
            children.append(self.parse_statement())
        return self.node("if_statement", children)

    def parse_parenthesized(self) -> SyntaxNode:
        if not self.at("("):
            return self.error_until({")", "{", ";"}, consume_sync=False)
        children = [self.take()]
        if not self.at(")"):
            children.append(self.parse_expression({")"}, required=True))
        if self.at(")"):
            children.append(self.take())
        return self.node("parenthesized_expression", children)

    def parse_for(self) -> SyntaxNode:
        kw = self.take()
        children = [kw]
        if not self.at("("):
            children.append(self.error_until({"{", ";"}, consume_sync=False))
            return self.node("for_statement", children)
        enhanced = self._for_is_enhanced()
        children.append(self.take())  # '('
        if enhanced:
            mods = self.parse_modifiers()
            if mods:
                children.append(mods)
            ty = self.try_parse_type()
            if ty is not None:
                children.append(ty)
            if self.at("identifier"):
                children.append(self.take())
            if self.at(":"):
                children.append(self.take())
            children.append(self.parse_expression({")"}, required=True))
            if self.at(")"):
                children.append(self.take())
            children.append(self.parse_statement())
            return self.node("enhanced_for_statement", children)

        # init
        if self.at(";"):
            children.append(self.take())
        else:
            init = self.try_parse_local_declaration()
            if init is not None:
                children.append(init)  # consumes its ';'
            else:
                children.append(self.parse_expression({";"}, required=False))
                if self.at(";"):
                    children.append(self.take())
        # condition
        if not self.at(";"):
            children.append(self.parse_expression({";"}, required=False))
        if self.at(";"):
            children.append(self.take())
        # update
        if not self.at(")"):
            children.append(self.parse_expression({")"}, required=False))
        if self.at(")"):
            children.append(self.take())
        children.append(self.parse_statement())
        return self.node("for_statement", children)

    def _for_is_enhanced(self) -> bool:
        """Look ahead inside for(...) for a ':' before any ';' at depth 1."""
        depth = 0
        pending_ternary = 0
        i = self.pos
        while i < self.n:
            k = self.toks[i].kind
            if k == "(":
                depth += 1
            elif k == ")":
                depth -= 1
                if depth == 0:
                    return False
            elif depth == 1:
                if k == ";":
                    return False
                if k == "?":
                    nxt = self.toks[i + 1].kind if i + 1 < self.n else ""
                    if nxt not in {"extends", "super", ",", ">"}:
                        pending_ternary += 1
                elif k == ":":
                    if pending_ternary:
                        pending_ternary -= 1
                    else:
                        return True
            i += 1
        return False

    def parse_switch(self) -> SyntaxNode:
        kw = self.take()
        cond = self.parse_parenthesized()
        children = [kw, cond]
        if self.at("{"):
            children.append(self.parse_switch_block())
        return self.node("switch_expression", children)

    def parse_switch_block(self) -> SyntaxNode:
        children = [self.take()]  # '{'
        while not self.eof() and not self.at("}"):
            if self.at("case") or self.at("default"):
                children.append(self.parse_switch_group())
            else:
                before = self.pos
                children.append(self.parse_statement())
                if self.pos == before:
                    children.append(self.node("ERROR", [self.take()]))
        if self.at("}"):
            children.append(self.take())
        return self.node("switch_block", children)

    def parse_switch_group(self) -> SyntaxNode:
        label_children = [self.take()]  # 'case' | 'default'
        if label_children[0].category == "case":
            label_children.append(self.parse_expression({":", "->"}, required=False))
        label = self.node("switch_label", label_children)
        if self.at("->"):
            arrow = self.take()
            if self.at("{"):
                body = self.parse_block()
            elif self.at("throw"):
                body = self.parse_statement()
            else:
                body = self.parse_expression({";"}, required=True)
                semi = self.take_if(";")
                if semi is not None:
                    body = self.node("expression_statement", [body, semi])
            return self.node("switch_rule", [label, arrow, body])
        children = [label]
        if self.at(":"):
            children.append(self.take())
        while not self.eof() and not self.at_any({"case", "default", "}"}):
            before = self.pos
            children.append(self.parse_statement())
            if self.pos == before:
                children.append(self.node("ERROR", [self.take()]))
        return self.node("switch_block_statement_group", children)

    def parse_try(self) -> SyntaxNode:
        kw = self.take()
        children = [kw]
        with_resources = False
        if self.at("("):
            with_resources = True
            children.append(self._balanced("resource_specification", "(", ")"))
        if self.at("{"):
            children.append(self.parse_block())
        while self.at("catch"):
            children.append(self.parse_catch())
        if self.at("finally"):
            fin = [self.take()]
            if self.at("{"):
                fin.append(self.parse_block())
            children.append(self.node("finally_clause", fin))
        category = "try_with_resources_statement" if with_resources else "try_statement"
        return self.node(category, children)

    def parse_catch(self) -> SyntaxNode:
        kw = self.take()
        children = [kw]
        if self.at("("):
            children.append(self._balanced("catch_formal_parameter", "(", ")"))
        if self.at("{"):
            children.append(self.parse_block())
        return self.node("catch_clause", children)

    # -- expressions -------------------------------------------------------

    def parse_expression(self, stop: set[str], required: bool) -> SyntaxNode:
        """Shallow expression parse: delimiter-aware, surfaces lambdas,
        anonymous classes, switch expressions and nested initializers."""
        children: list[SyntaxNode] = []
        while not self.eof():
            t = self.peek()
            k = t.kind
            if k in stop or k in {";", ")", "]", "}"}:
                break
            if k == "identifier" and self.at("->", 1):
                ident, arrow = self.take(), self.take()
                body = self._lambda_body()
                children.append(self.node("lambda_expression", [ident, arrow, body]))
                continue
            if k == "(":
                if self._paren_starts_lambda():
                    children.append(self.parse_lambda_from_parens())
                else:
                    children.append(self._argument_group_or_parens(children))
                continue
            if k == "new":
                children.append(self.parse_object_creation())
                continue
            if k == "switch":
                children.append(self.parse_switch())
                continue
            if k == "{":
                children.append(self.parse_array_initializer())
                continue
            if k == "[":
                children.append(self.take())
                if not self.at("]"):
                    children.append(self.parse_expression({"]"}, required=False))
                if self.at("]"):
                    children.append(self.take())
                continue
            children.append(self.take())

        if not children:
            if required:
                return self.node("ERROR", [])
            return self.node("expression", [])
        if len(children) == 1:
            return children[0]
        return self.node("expression", children)

    def _lambda_body(self) -> SyntaxNode:
        if self.at("{"):
            return self.parse_block()
        return self.parse_expression({",", ";", ")"}, required=True)

    def _paren_starts_lambda(self) -> bool:
        depth = 0
        i = self.pos
        while i < self.n:
            k = self.toks[i].kind
            if k == "(":
                depth += 1
            elif k == ")":
                depth -= 1
                if depth == 0:
                    return i + 1 < self.n and self.toks[i + 1].kind == "->"
            elif k in {";", "{"} and depth == 1:
                return False
            i += 1
        return False

    def parse_lambda_from_parens(self) -> SyntaxNode:
        params = self.try_parse_strict_formal_parameters()
        if params is None:
            params = self._balanced("inferred_parameters", "(", ")")
        arrow = self.take_if("->")
        body = self._lambda_body()
        children = [params] + ([arrow] if arrow else []) + [body]
        return self.node("lambda_expression", children)

    def _argument_group_or_parens(self, prior: list[SyntaxNode]) -> SyntaxNode:
        category = "argument_list" if prior else "parenthesized_expression"
        children = [self.take()]  # '('
        while not self.eof() and not self.at(")"):
            children.append(self.parse_expression({",", ")"}, required=False))
            if self.at(","):
                children.append(self.take())
        if self.at(")"):
            children.append(self.take())
        return self.node(category, children)

    def _argument_group(self) -> SyntaxNode:
        children = [self.take()]  # '('
        while not self.eof() and not self.at(")"):
            children.append(self.parse_expression({",", ")"}, required=False))
            if self.at(","):
                children.append(self.take())
        if self.at(")"):
            children.append(self.take())
        return self.node("argument_list", children)

    def parse_object_creation(self) -> SyntaxNode:
        kw = self.take()  # 'new'
        children = [kw]
        ty = self.try_parse_type(allow_dims=False)
        if ty is not None:
            children.append(ty)
        if self.at("["):
            while self.at("["):
                children.append(self.take())
                if not self.at("]"):
                    children.append(self.parse_expression({"]"}, required=False))
                if self.at("]"):
                    children.append(self.take())
            if self.at("{"):
                children.append(self.parse_array_initializer())
            return self.node("array_creation_expression", children)
        if self.at("("):
            children.append(self._argument_group())
        if self.at("{"):
            children.append(self.parse_class_body("class_body"))
        return self.node("object_creation_expression", children)

    def parse_array_initializer(self) -> SyntaxNode:
        children = [self.take()]  # '{'
        while not self.eof() and not self.at("}"):
            if self.at("{"):
                children.append(self.parse_array_initializer())
            else:
                children.append(self.parse_expression({",", "}"}, required=False))
            if self.at(","):
                children.append(self.take())
        if self.at("}"):
            children.append(self.take())
        return self.node("array_initializer", children)


def parse(source: str) -> SyntaxNode:
    """Parse Java source text into a concrete syntax tree.

    Never raises on malformed input: broken stretches are wrapped in
    ERROR nodes and parsing resumes at the next statement boundary.
    """
    byte_of = _byte_offsets(source)
    tokens = _Lexer(source).tokens()
    return _Parser(tokens, byte_of).parse_program()


def tree_has_errors(root: SyntaxNode) -> bool:
    """True when the tree contains at least one ERROR node."""
    return any(node.category == "ERROR" for node in root.walk())


def count_internal_nodes(root: SyntaxNode) -> int:
    return sum(1 for node in root.walk() if not node.is_terminal)
