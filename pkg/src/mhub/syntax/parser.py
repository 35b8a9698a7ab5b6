"""Recursive-descent Modelica 3.6 parser.

Produces a full-coverage CST (every token of the input ends up in the tree,
malformed regions as error nodes) and, in the same pass, the lowered AST
fragments for well-formed regions. The parse is total: any byte sequence
yields a tree plus diagnostics, never an exception.

Out-of-grammar constructs (operator classes, external functions, synchronous
elements) parse into opaque/error nodes with diagnostic SYN002; inner/outer
prefixes are accepted syntactically and reported as SEM010.
"""
from __future__ import annotations

from typing import Optional

from ..diagnostics import (
    SEM_INNER_OUTER,
    SYN_PARSE_ERROR,
    SYN_UNSUPPORTED,
    Diagnostic,
    Severity,
)
from .cst import CstNode, SyntaxTree
from .lexer import Token, TokenKind, tokenize, unescape_string
from . import tree as ast

SECTION_STARTERS = frozenset(
    ["public", "protected", "equation", "algorithm", "initial", "external", "annotation", "end"]
)

CLASS_KEYWORDS = frozenset(
    ["class", "model", "record", "block", "connector", "type", "package", "function"]
)

RESTRICTION_MAP = {
    "class": ast.Restriction.MODEL,
    "model": ast.Restriction.MODEL,
    "record": ast.Restriction.RECORD,
    "block": ast.Restriction.BLOCK,
    "connector": ast.Restriction.CONNECTOR,
    "type": ast.Restriction.TYPE,
    "package": ast.Restriction.PACKAGE,
    "function": ast.Restriction.FUNCTION,
}

VARIABILITY_MAP = {
    "constant": ast.Variability.CONSTANT,
    "parameter": ast.Variability.PARAMETER,
    "discrete": ast.Variability.DISCRETE,
}

RELATIONAL_OPS = ("==", "<>", "<=", ">=", "<", ">")
ADD_OPS = ("+", "-", ".+", ".-")
MUL_OPS = ("*", "/", ".*", "./")


class Parser:
    def __init__(self, text: str, uri: str):
        self.text = text
        self.uri = uri
        self.toks = tokenize(text)
        self.pos = 0
        self.parse_diags: list[Diagnostic] = []
        self.lower_diags: list[Diagnostic] = []

    # -- token plumbing ------------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else self.toks[-1]

    def at_eof(self) -> bool:
        return self.peek().kind is TokenKind.EOF

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind in (TokenKind.KEYWORD, TokenKind.OP) and tok.text == text

    def at_any(self, *texts: str) -> bool:
        tok = self.peek()
        return tok.kind in (TokenKind.KEYWORD, TokenKind.OP) and tok.text in texts

    def at_ident(self) -> bool:
        return self.peek().kind is TokenKind.IDENT

    def take(self, node: CstNode) -> Token:
        tok = self.peek()
        if tok.kind is TokenKind.EOF:
            return tok
        self.pos += 1
        node.children.append(tok)
        return tok

    def force_consume(self, node: CstNode, message: str = "unexpected token") -> None:
        """Last-resort progress guarantee: move one token into an error node."""
        if self.at_eof():
            return
        tok = self.peek()
        self.pos += 1
        node.children.append(CstNode("error", [tok], is_error=True))
        self.diag(SYN_PARSE_ERROR, message, span=(tok.start, tok.end))

    def start(self) -> int:
        return self.peek().start

    def end(self) -> int:
        return self.toks[self.pos - 1].end if self.pos > 0 else 0

    def span_from(self, start: int) -> ast.Span:
        return (start, max(start, self.end()))

    # -- errors --------------------------------------------------------------

    def diag(self, code: str, message: str, span: Optional[tuple[int, int]] = None,
             severity: Severity = Severity.ERROR, lower: bool = False) -> None:
        if span is None:
            tok = self.peek()
            span = (tok.start, max(tok.end, tok.start + 1) if tok.kind is not TokenKind.EOF else tok.end)
        target = self.lower_diags if lower else self.parse_diags
        target.append(Diagnostic(self.uri, span[0], span[1], severity, code, message))

    def missing(self, node: CstNode, what: str) -> None:
        """Zero-width error marker: reports an expected-but-absent token."""
        tok = self.peek()
        self.diag(SYN_PARSE_ERROR, f"expected {what}")
        marker = CstNode("missing", [Token(tok.kind, "", tok.start, tok.start)], is_error=True)
        node.children.append(marker)

    def expect(self, node: CstNode, text: str) -> bool:
        if self.at(text):
            self.take(node)
            return True
        self.missing(node, f"'{text}'")
        return False

    def expect_ident(self, node: CstNode) -> Optional[Token]:
        if self.at_ident():
            return self.take(node)
        self.missing(node, "identifier")
        return None

    def skip_to(self, node: CstNode, stops: frozenset[str] | set[str], consume_stop: bool = False,
                code: str = SYN_PARSE_ERROR, message: str = "unexpected tokens") -> None:
        """Panic recovery: consume tokens into an error node until a stop token."""
        err = CstNode("error", is_error=True)
        begin = self.start()
        while not self.at_eof():
            tok = self.peek()
            if tok.kind in (TokenKind.KEYWORD, TokenKind.OP) and tok.text in stops:
                if consume_stop and tok.text == ";":
                    err.children.append(tok)
                    self.pos += 1
                break
            err.children.append(tok)
            self.pos += 1
        if not err.children:
            err.children.append(Token(self.peek().kind, "", begin, begin))
        node.children.append(err)
        self.diag(code, message, span=(begin, max(begin + 1, self.end())))

    # -- stored definition ---------------------------------------------------

    def parse_stored_definition(self) -> CstNode:
        node = CstNode("stored_definition")
        within: Optional[str] = None
        classes: list[ast.AstClass] = []
        begin = self.start()

        if self.at("within"):
            wnode = CstNode("within_clause")
            self.take(wnode)
            within = ""
            if self.at_ident():
                within = self.parse_name(wnode)
            self.expect(wnode, ";")
            node.children.append(wnode)

        while not self.at_eof():
            final = False
            if self.at("final"):
                # lookahead: 'final' must precede a class definition here
                final = True
            if self._at_class_start(skip_final=final):
                cnode, cls = self.parse_class_definition(take_final=final)
                node.children.append(cnode)
                if cls is not None:
                    if final:
                        cls = _replace(cls, final=True)
                    classes.append(cls)
                self.expect(node, ";")
            else:
                self.skip_to(node, {";"}, consume_stop=True,
                             message="expected class definition")

        # absorb EOF token so trailing trivia is covered
        node.children.append(self.toks[-1])
        node.ast = ast.StoredDefinition(  # type: ignore[attr-defined]
            within=within, classes=tuple(classes), span=self.span_from(begin)
        )
        return node

    def _at_class_start(self, skip_final: bool = False) -> bool:
        k = 1 if skip_final else 0
        for _ in range(4):  # encapsulated/partial/operator/expandable prefixes
            tok = self.peek(k)
            if tok.kind is not TokenKind.KEYWORD:
                return False
            if tok.text in CLASS_KEYWORDS:
                return True
            if tok.text in ("encapsulated", "partial", "operator", "expandable", "pure", "impure"):
                k += 1
                continue
            return False
        return False

    # -- class definitions ----------------------------------------------------

    def parse_class_definition(self, take_final: bool = False,
                               replaceable: bool = False,
                               redeclare: bool = False) -> tuple[CstNode, Optional[ast.AstClass]]:
        node = CstNode("class_definition")
        begin = self.start()
        if take_final:
            self.take(node)  # 'final'
        encapsulated = partial = False
        unsupported = False
        if self.at("encapsulated"):
            self.take(node)
            encapsulated = True
        if self.at("partial"):
            self.take(node)
            partial = True
        if self.at("operator"):
            self.diag(SYN_UNSUPPORTED, "operator classes are not supported")
            self.take(node)
            unsupported = True
        if self.at_any("expandable", "pure", "impure"):
            self.take(node)
        if not self.at_any(*CLASS_KEYWORDS):
            self.skip_to(node, {";"}, message="expected class keyword")
            return node, None
        restriction_tok = self.take(node)
        restriction = RESTRICTION_MAP[restriction_tok.text]

        spec_node, cls = self.parse_class_specifier(restriction, encapsulated, partial)
        node.children.append(spec_node)
        if unsupported:
            node.is_error = True
            cls = None
        if cls is not None:
            cls = _replace(cls, replaceable=replaceable, redeclare=redeclare,
                           span=self.span_from(begin))
        return node, cls

    def parse_class_specifier(self, restriction: ast.Restriction,
                              encapsulated: bool, partial: bool) -> tuple[CstNode, Optional[ast.AstClass]]:
        node = CstNode("class_specifier")
        if self.at("extends"):  # class-extends specifier
            self.diag(SYN_UNSUPPORTED, "class-extends specifier is not supported")
            self.skip_to(node, {";"}, code=SYN_UNSUPPORTED, message="class-extends specifier")
            return node, None
        name_tok = self.expect_ident(node)
        if name_tok is None:
            self.skip_to(node, {";"})
            return node, None
        name = _ident_text(name_tok)

        if self.at("="):
            self.take(node)
            return self.parse_short_class_tail(node, name, restriction, encapsulated, partial)

        comment = self.parse_string_comment(node)
        body = self.parse_composition(node)
        end_node = CstNode("end_clause")
        self.expect(end_node, "end")
        end_name = self.expect_ident(end_node)
        if end_name is not None and _ident_text(end_name) != name:
            self.diag(SYN_PARSE_ERROR, f"end name '{_ident_text(end_name)}' does not match '{name}'",
                      span=(end_name.start, end_name.end))
        node.children.append(end_node)

        cls = ast.AstClass(
            name=name,
            restriction=restriction,
            partial=partial,
            encapsulated=encapsulated,
            extends_clauses=tuple(body["extends"]),
            imports=tuple(body["imports"]),
            components=tuple(body["components"]),
            nested_classes=tuple(body["classes"]),
            equations=tuple(body["equations"]),
            initial_equations=tuple(body["initial_equations"]),
            algorithms=tuple(body["algorithms"]),
            initial_algorithms=tuple(body["initial_algorithms"]),
            annotation=body["annotation"],
            comment=comment,
        )
        return node, cls

    def parse_short_class_tail(self, node: CstNode, name: str, restriction: ast.Restriction,
                               encapsulated: bool, partial: bool) -> tuple[CstNode, Optional[ast.AstClass]]:
        if self.at("enumeration"):
            self.take(node)
            literals: list[ast.EnumLiteral] = []
            self.expect(node, "(")
            if self.at(":"):
                self.take(node)
                self.diag(SYN_UNSUPPORTED, "unspecified enumeration (:) is not supported")
            while self.at_ident():
                lit_tok = self.take(node)
                lit_comment = self.parse_string_comment(node)
                literals.append(ast.EnumLiteral(_ident_text(lit_tok), lit_comment))
                if self.at(","):
                    self.take(node)
                else:
                    break
            self.expect(node, ")")
            comment = self.parse_string_comment(node)
            self.parse_optional_annotation(node)
            cls = ast.AstClass(name=name, restriction=ast.Restriction.TYPE,
                               encapsulated=encapsulated, partial=partial,
                               enum_literals=tuple(literals), comment=comment)
            return node, cls
        if self.at("der"):
            self.diag(SYN_UNSUPPORTED, "der class specifier is not supported")
            self.skip_to(node, {";"}, code=SYN_UNSUPPORTED, message="der class specifier")
            return node, None
        if self.at_any("input", "output"):
            self.take(node)
        if not self.at_ident():
            self.skip_to(node, {";"})
            return node, None
        target = self.parse_name(node)
        subs: tuple = ()
        if self.at("["):
            subs = self.parse_array_subscripts(node)
        mod = ast.Modification()
        if self.at("("):
            mod = self.parse_class_modification(node)
        comment = self.parse_string_comment(node)
        annotation = self.parse_optional_annotation(node)
        cls = ast.AstClass(name=name, restriction=restriction,
                           encapsulated=encapsulated, partial=partial,
                           alias_target=target, alias_subscripts=subs,
                           alias_modification=mod, annotation=annotation, comment=comment)
        return node, cls

    # -- composition -----------------------------------------------------------

    def parse_composition(self, parent: CstNode) -> dict:
        node = CstNode("composition")
        parent.children.append(node)
        body = {
            "extends": [], "imports": [], "components": [], "classes": [],
            "equations": [], "initial_equations": [], "algorithms": [],
            "initial_algorithms": [], "annotation": None,
        }
        self.parse_element_list(node, body)
        while not self.at_eof():
            if self.at_any("public", "protected"):
                self.take(node)
                self.parse_element_list(node, body)
            elif self.at("initial") and self.peek(1).text == "equation":
                self.take(node)
                self.take(node)
                body["initial_equations"].extend(self.parse_equation_list(node))
            elif self.at("initial") and self.peek(1).text == "algorithm":
                self.take(node)
                self.take(node)
                body["initial_algorithms"].append(tuple(self.parse_statement_list(node)))
            elif self.at("equation"):
                self.take(node)
                body["equations"].extend(self.parse_equation_list(node))
            elif self.at("algorithm"):
                self.take(node)
                body["algorithms"].append(tuple(self.parse_statement_list(node)))
            elif self.at("external"):
                self.diag(SYN_UNSUPPORTED, "external function interfaces are not supported")
                self.skip_to(node, {";"}, consume_stop=True,
                             code=SYN_UNSUPPORTED, message="external clause")
            elif self.at("annotation"):
                body["annotation"] = self.parse_annotation(node)
                self.expect(node, ";")
            elif self.at("end"):
                break
            else:
                before = self.pos
                self.parse_element_list(node, body)
                if self.pos == before:
                    self.force_consume(node, "unexpected token in class body")
        return body

    def parse_element_list(self, node: CstNode, body: dict) -> None:
        while not self.at_eof():
            tok = self.peek()
            if tok.kind is TokenKind.KEYWORD and tok.text in SECTION_STARTERS:
                # 'initial' only starts a section when followed by equation/algorithm
                if tok.text != "initial" or self.peek(1).text in ("equation", "algorithm"):
                    return
            if not (self.at_ident() or tok.kind is TokenKind.KEYWORD):
                self.skip_to(node, SECTION_STARTERS | {";"}, consume_stop=True,
                             message="expected element")
                continue
            before = self.pos
            self.parse_element(node, body)
            self.expect(node, ";")
            if self.pos == before:
                self.force_consume(node)

    def parse_element(self, node: CstNode, body: dict) -> None:
        elem = CstNode("element")
        node.children.append(elem)
        if self.at("import"):
            imp = self.parse_import_clause(elem)
            if imp is not None:
                body["imports"].append(imp)
            return
        if self.at("extends"):
            ext = self.parse_extends_clause(elem)
            if ext is not None:
                body["extends"].append(ext)
            return

        redeclare = final = replaceable = False
        if self.at("redeclare"):
            self.take(elem)
            redeclare = True
        if self.at("final"):
            self.take(elem)
            final = True
        if self.at_any("inner", "outer"):
            tok = self.take(elem)
            if self.at_any("inner", "outer"):
                self.take(elem)
            self.diag(SEM_INNER_OUTER, f"'{tok.text}' elements are not supported",
                      span=(tok.start, tok.end), lower=True)
        if self.at("replaceable"):
            self.take(elem)
            replaceable = True

        if self._at_class_start():
            cnode, cls = self.parse_class_definition(replaceable=replaceable, redeclare=redeclare)
            elem.children.append(cnode)
            if cls is not None:
                body["classes"].append(_replace(cls, final=final))
            self.parse_constraining_clause(elem)
            return

        comp_list = self.parse_component_clause(elem, redeclare=redeclare, final=final,
                                                replaceable=replaceable)
        self.parse_constraining_clause(elem)
        body["components"].extend(comp_list)

    def parse_constraining_clause(self, node: CstNode) -> None:
        if self.at("constrainedby"):
            self.take(node)
            if self.at_ident():
                self.parse_name(node)
            if self.at("("):
                self.parse_class_modification(node)
            self.parse_string_comment(node)

    def parse_import_clause(self, node: CstNode) -> Optional[ast.Import]:
        begin = self.start()
        self.take(node)  # 'import'
        if not self.at_ident():
            self.skip_to(node, {";"})
            return None
        first = self.take(node)
        if self.at("="):
            self.take(node)
            target = self.parse_name(node)
            self.parse_string_comment(node)
            return ast.Import(name=target, alias=_ident_text(first), span=self.span_from(begin))
        parts = [_ident_text(first)]
        wildcard = False
        selection: list[str] = []
        while self.at(".") or self.at(".*"):
            if self.at(".*"):  # lexed as one elementwise-multiply token
                self.take(node)
                wildcard = True
                break
            self.take(node)
            if self.at("*"):
                self.take(node)
                wildcard = True
                break
            if self.at("{"):
                self.take(node)
                while self.at_ident():
                    selection.append(_ident_text(self.take(node)))
                    if self.at(","):
                        self.take(node)
                    else:
                        break
                self.expect(node, "}")
                break
            tok = self.expect_ident(node)
            if tok is None:
                break
            parts.append(_ident_text(tok))
        self.parse_string_comment(node)
        return ast.Import(name=".".join(parts), wildcard=wildcard,
                          selection=tuple(selection), span=self.span_from(begin))

    def parse_extends_clause(self, node: CstNode) -> Optional[ast.ExtendsClause]:
        begin = self.start()
        self.take(node)  # 'extends'
        if not self.at_ident():
            self.skip_to(node, {";"})
            return None
        base = self.parse_name(node)
        mod = ast.Modification()
        if self.at("("):
            mod = self.parse_class_modification(node)
        annotation = self.parse_optional_annotation(node)
        return ast.ExtendsClause(base_name=base, modification=mod,
                                 annotation=annotation, span=self.span_from(begin))

    def parse_component_clause(self, node: CstNode, redeclare: bool, final: bool,
                               replaceable: bool) -> list[ast.Component]:
        begin = self.start()
        clause = CstNode("component_clause")
        node.children.append(clause)
        flow_prefix = None
        variability = None
        causality = ast.Causality.NONE
        if self.at_any("flow", "stream"):
            flow_prefix = self.take(clause).text
        if self.at_any("constant", "parameter", "discrete"):
            variability = VARIABILITY_MAP[self.take(clause).text]
        if self.at_any("input", "output"):
            causality = ast.Causality.INPUT if self.take(clause).text == "input" else ast.Causality.OUTPUT
        if not self.at_ident():
            self.skip_to(clause, {";"}, message="expected type name")
            return []
        type_name = self.parse_name(clause)
        type_subs: tuple = ()
        if self.at("["):
            type_subs = self.parse_array_subscripts(clause)

        comps: list[ast.Component] = []
        while True:
            decl = CstNode("declaration")
            clause.children.append(decl)
            name_tok = self.expect_ident(decl)
            if name_tok is None:
                self.skip_to(clause, {";", ","})
                if self.at(","):
                    self.take(clause)
                    continue
                break
            subs: tuple = ()
            if self.at("["):
                subs = self.parse_array_subscripts(decl)
            mod = ast.Modification()
            if self.at_any("(", "=", ":="):
                mod = self.parse_modification(decl)
            condition = None
            if self.at("if"):
                self.take(decl)
                condition = self.expr_ast(self.parse_expression(decl))
            comment = self.parse_string_comment(decl)
            annotation = self.parse_optional_annotation(decl)
            comps.append(ast.Component(
                type_name=type_name,
                name=_ident_text(name_tok),
                array_subscripts=tuple(subs) + tuple(type_subs),
                variability=variability,
                causality=causality,
                flow_prefix=flow_prefix,
                modification=mod,
                replaceable=replaceable,
                redeclare=redeclare,
                final=final,
                condition=condition,
                comment=comment,
                annotation=annotation,
                span=self.span_from(begin),
            ))
            if self.at(","):
                self.take(clause)
                continue
            break
        return comps

    # -- modifications ---------------------------------------------------------

    def parse_modification(self, node: CstNode) -> ast.Modification:
        begin = self.start()
        if self.at_any("=", ":="):
            self.take(node)
            binding = self.expr_ast(self.parse_expression(node))
            return ast.Modification(binding=binding, span=self.span_from(begin))
        mod = self.parse_class_modification(node)
        if self.at_any("=", ":="):
            self.take(node)
            binding = self.expr_ast(self.parse_expression(node))
            mod = _replace(mod, binding=binding)
        return mod

    def parse_class_modification(self, node: CstNode) -> ast.Modification:
        begin = self.start()
        cm = CstNode("class_modification")
        node.children.append(cm)
        self.expect(cm, "(")
        submods: list[tuple[str, ast.Modification]] = []
        redecls: list[ast.Redeclaration] = []
        if not self.at(")"):
            while not self.at_eof():
                self.parse_argument(cm, submods, redecls)
                if self.at(","):
                    self.take(cm)
                    continue
                break
        self.expect(cm, ")")
        return ast.Modification(submods=tuple(submods), redeclarations=tuple(redecls),
                                span=self.span_from(begin))

    def parse_argument(self, node: CstNode, submods: list, redecls: list) -> None:
        arg = CstNode("argument")
        node.children.append(arg)
        each = final = False
        if self.at("redeclare"):
            self.take(arg)
            if self.at("each"):
                self.take(arg)
                each = True
            if self.at("final"):
                self.take(arg)
                final = True
            replaceable = False
            if self.at("replaceable"):
                self.take(arg)
                replaceable = True
            if self._at_class_start():
                cnode, cls = self.parse_class_definition()
                arg.children.append(cnode)
                self.parse_constraining_clause(arg)
                if cls is not None:
                    redecls.append(ast.Redeclaration(name=cls.name, short_class=cls, each=each,
                                                     final=final, replaceable=replaceable))
            else:
                comps = self.parse_component_clause(arg, redeclare=True, final=final,
                                                    replaceable=replaceable)
                self.parse_constraining_clause(arg)
                for comp in comps:
                    redecls.append(ast.Redeclaration(name=comp.name, component=comp, each=each,
                                                     final=final, replaceable=replaceable))
            return
        if self.at("each"):
            self.take(arg)
            each = True
        if self.at("final"):
            self.take(arg)
            final = True
        if self.at("replaceable"):
            # replaceable element inside a modification without redeclare keyword
            self.take(arg)
            if self._at_class_start():
                cnode, cls = self.parse_class_definition(replaceable=True)
                arg.children.append(cnode)
                self.parse_constraining_clause(arg)
                if cls is not None:
                    redecls.append(ast.Redeclaration(name=cls.name, short_class=cls, each=each,
                                                     final=final, replaceable=True))
            else:
                comps = self.parse_component_clause(arg, redeclare=False, final=final,
                                                    replaceable=True)
                self.parse_constraining_clause(arg)
                for comp in comps:
                    redecls.append(ast.Redeclaration(name=comp.name, component=comp, each=each,
                                                     final=final, replaceable=True))
            return
        if not self.at_ident():
            self.skip_to(arg, {",", ")", ";"}, message="expected modification argument")
            return
        path = [_ident_text(self.take(arg))]
        while self.at(".") and self.peek(1).kind is TokenKind.IDENT:
            self.take(arg)
            path.append(_ident_text(self.take(arg)))
        inner = ast.Modification(each=each, final=final)
        if self.at_any("(", "=", ":="):
            got = self.parse_modification(arg)
            inner = _replace(got, each=each, final=final)
        self.parse_string_comment(arg)
        # fold dotted path into nested single-name submods
        for name in reversed(path[1:]):
            inner = ast.Modification(submods=((name, inner),))
        submods.append((path[0], inner))

    # -- equations / statements -------------------------------------------------

    def parse_equation_list(self, node: CstNode) -> list[ast.Equation]:
        out: list[ast.Equation] = []
        while not self.at_eof():
            tok = self.peek()
            if tok.kind is TokenKind.KEYWORD and tok.text in SECTION_STARTERS:
                if tok.text != "initial" or self.peek(1).text in ("equation", "algorithm"):
                    break
            before = self.pos
            eq = self.parse_equation(node)
            if eq is not None:
                out.append(eq)
            self.expect(node, ";")
            if self.pos == before:
                self.force_consume(node)
        return out

    def parse_equation(self, parent: CstNode) -> Optional[ast.Equation]:
        node = CstNode("equation")
        parent.children.append(node)
        begin = self.start()
        if self.at("connect"):
            self.take(node)
            self.expect(node, "(")
            a = self.expr_ast(self.parse_expression(node))
            self.expect(node, ",")
            b = self.expr_ast(self.parse_expression(node))
            self.expect(node, ")")
            self.parse_comment(node)
            if isinstance(a, ast.Ref) and isinstance(b, ast.Ref):
                return ast.EqConnect(a=a, b=b, span=self.span_from(begin))
            self.diag(SYN_PARSE_ERROR, "connect arguments must be component references",
                      span=self.span_from(begin))
            node.is_error = True
            return None
        if self.at("for"):
            self.take(node)
            iters = self.parse_for_indices(node)
            self.expect(node, "loop")
            body = self.parse_equation_block(node, stops={"end"})
            self.expect(node, "end")
            self.expect(node, "for")
            return ast.EqFor(iterators=iters, body=tuple(body), span=self.span_from(begin))
        if self.at("if"):
            self.take(node)
            branches = []
            cond = self.expr_ast(self.parse_expression(node))
            self.expect(node, "then")
            body = self.parse_equation_block(node, stops={"elseif", "else", "end"})
            branches.append((cond, tuple(body)))
            while self.at("elseif"):
                self.take(node)
                cond = self.expr_ast(self.parse_expression(node))
                self.expect(node, "then")
                body = self.parse_equation_block(node, stops={"elseif", "else", "end"})
                branches.append((cond, tuple(body)))
            orelse: tuple = ()
            if self.at("else"):
                self.take(node)
                orelse = tuple(self.parse_equation_block(node, stops={"end"}))
            self.expect(node, "end")
            self.expect(node, "if")
            if any(c is None for c, _ in branches):
                node.is_error = True
                return None
            return ast.EqIf(branches=tuple(branches), orelse=orelse, span=self.span_from(begin))
        if self.at("when"):
            self.take(node)
            branches = []
            cond = self.expr_ast(self.parse_expression(node))
            self.expect(node, "then")
            body = self.parse_equation_block(node, stops={"elsewhen", "end"})
            branches.append((cond, tuple(body)))
            while self.at("elsewhen"):
                self.take(node)
                cond = self.expr_ast(self.parse_expression(node))
                self.expect(node, "then")
                body = self.parse_equation_block(node, stops={"elsewhen", "end"})
                branches.append((cond, tuple(body)))
            self.expect(node, "end")
            self.expect(node, "when")
            if any(c is None for c, _ in branches):
                node.is_error = True
                return None
            return ast.EqWhen(branches=tuple(branches), span=self.span_from(begin))

        lhs = self.expr_ast(self.parse_expression(node))
        if self.at("="):
            self.take(node)
            rhs = self.expr_ast(self.parse_expression(node))
            self.parse_comment(node)
            if lhs is None or rhs is None:
                node.is_error = True
                return None
            return ast.EqEquality(lhs=lhs, rhs=rhs, span=self.span_from(begin))
        self.parse_comment(node)
        if isinstance(lhs, ast.Call):
            return ast.EqCall(call=lhs, span=self.span_from(begin))
        if lhs is not None:
            self.diag(SYN_PARSE_ERROR, "expected '=' in equation", span=self.span_from(begin))
        node.is_error = True
        return None

    def parse_equation_block(self, node: CstNode, stops: set[str]) -> list[ast.Equation]:
        out: list[ast.Equation] = []
        while not self.at_eof() and not self.at_any(*stops):
            before = self.pos
            eq = self.parse_equation(node)
            if eq is not None:
                out.append(eq)
            self.expect(node, ";")
            if self.pos == before:
                self.force_consume(node)
        return out

    def parse_for_indices(self, node: CstNode) -> tuple[ast.Iterator, ...]:
        iters: list[ast.Iterator] = []
        while True:
            tok = self.expect_ident(node)
            if tok is None:
                break
            domain = None
            if self.at("in"):
                self.take(node)
                domain = self.expr_ast(self.parse_expression(node))
            iters.append(ast.Iterator(_ident_text(tok), domain))
            if self.at(","):
                self.take(node)
                continue
            break
        return tuple(iters)

    def parse_statement_list(self, node: CstNode) -> list[ast.Statement]:
        out: list[ast.Statement] = []
        while not self.at_eof():
            tok = self.peek()
            if tok.kind is TokenKind.KEYWORD and tok.text in SECTION_STARTERS:
                if tok.text != "initial" or self.peek(1).text in ("equation", "algorithm"):
                    break
            before = self.pos
            st = self.parse_statement(node)
            if st is not None:
                out.append(st)
            self.expect(node, ";")
            if self.pos == before:
                self.force_consume(node)
        return out

    def parse_statement(self, parent: CstNode) -> Optional[ast.Statement]:
        node = CstNode("statement")
        parent.children.append(node)
        begin = self.start()
        if self.at("return"):
            self.take(node)
            self.parse_comment(node)
            return ast.StReturn(span=self.span_from(begin))
        if self.at("break"):
            self.take(node)
            self.parse_comment(node)
            return ast.StBreak(span=self.span_from(begin))
        if self.at("if"):
            self.take(node)
            branches = []
            cond = self.expr_ast(self.parse_expression(node))
            self.expect(node, "then")
            body = self.parse_statement_block(node, stops={"elseif", "else", "end"})
            branches.append((cond, tuple(body)))
            while self.at("elseif"):
                self.take(node)
                cond = self.expr_ast(self.parse_expression(node))
                self.expect(node, "then")
                body = self.parse_statement_block(node, stops={"elseif", "else", "end"})
                branches.append((cond, tuple(body)))
            orelse: tuple = ()
            if self.at("else"):
                self.take(node)
                orelse = tuple(self.parse_statement_block(node, stops={"end"}))
            self.expect(node, "end")
            self.expect(node, "if")
            if any(c is None for c, _ in branches):
                node.is_error = True
                return None
            return ast.StIf(branches=tuple(branches), orelse=orelse, span=self.span_from(begin))
        if self.at("for"):
            self.take(node)
            iters = self.parse_for_indices(node)
            self.expect(node, "loop")
            body = self.parse_statement_block(node, stops={"end"})
            self.expect(node, "end")
            self.expect(node, "for")
            return ast.StFor(iterators=iters, body=tuple(body), span=self.span_from(begin))
        if self.at("while"):
            self.take(node)
            cond = self.expr_ast(self.parse_expression(node))
            self.expect(node, "loop")
            body = self.parse_statement_block(node, stops={"end"})
            self.expect(node, "end")
            self.expect(node, "while")
            if cond is None:
                node.is_error = True
                return None
            return ast.StWhile(condition=cond, body=tuple(body), span=self.span_from(begin))
        if self.at("when"):
            self.take(node)
            branches = []
            cond = self.expr_ast(self.parse_expression(node))
            self.expect(node, "then")
            body = self.parse_statement_block(node, stops={"elsewhen", "end"})
            branches.append((cond, tuple(body)))
            while self.at("elsewhen"):
                self.take(node)
                cond = self.expr_ast(self.parse_expression(node))
                self.expect(node, "then")
                body = self.parse_statement_block(node, stops={"elsewhen", "end"})
                branches.append((cond, tuple(body)))
            self.expect(node, "end")
            self.expect(node, "when")
            if any(c is None for c, _ in branches):
                node.is_error = True
                return None
            return ast.StWhen(branches=tuple(branches), span=self.span_from(begin))

        target = self.expr_ast(self.parse_expression(node))
        if self.at(":="):
            self.take(node)
            value = self.expr_ast(self.parse_expression(node))
            self.parse_comment(node)
            if value is None or not isinstance(target, (ast.Ref, ast.TupleExpr)):
                node.is_error = True
                return None
            return ast.StAssign(target=target, value=value, span=self.span_from(begin))
        self.parse_comment(node)
        if isinstance(target, ast.Call):
            return ast.StCall(call=target, span=self.span_from(begin))
        if target is not None:
            self.diag(SYN_PARSE_ERROR, "expected ':=' in statement", span=self.span_from(begin))
        node.is_error = True
        return None

    def parse_statement_block(self, node: CstNode, stops: set[str]) -> list[ast.Statement]:
        out: list[ast.Statement] = []
        while not self.at_eof() and not self.at_any(*stops):
            before = self.pos
            st = self.parse_statement(node)
            if st is not None:
                out.append(st)
            self.expect(node, ";")
            if self.pos == before:
                self.force_consume(node)
        return out

    # -- expressions -------------------------------------------------------------

    def expr_ast(self, node: CstNode) -> Optional[ast.Expr]:
        return getattr(node, "ast", None)

    def parse_expression(self, parent: CstNode) -> CstNode:
        node = CstNode("expression")
        parent.children.append(node)
        begin = self.start()
        if self.at("if"):
            self.take(node)
            branches = []
            cond = self.expr_ast(self.parse_expression(node))
            self.expect(node, "then")
            val = self.expr_ast(self.parse_expression(node))
            branches.append((cond, val))
            while self.at("elseif"):
                self.take(node)
                c = self.expr_ast(self.parse_expression(node))
                self.expect(node, "then")
                v = self.expr_ast(self.parse_expression(node))
                branches.append((c, v))
            self.expect(node, "else")
            orelse = self.expr_ast(self.parse_expression(node))
            if orelse is None or any(c is None or v is None for c, v in branches):
                node.is_error = True
                node.ast = None
            else:
                node.ast = ast.IfExpr(branches=tuple(branches), orelse=orelse,
                                      span=self.span_from(begin))
            return node
        node.ast = self.parse_simple_expression(node, begin)
        if node.ast is None:
            node.is_error = True
        return node

    def parse_simple_expression(self, node: CstNode, begin: int) -> Optional[ast.Expr]:
        first = self.parse_logical(node)
        if not self.at(":"):
            return first
        self.take(node)
        second = self.parse_logical(node)
        if self.at(":"):
            self.take(node)
            third = self.parse_logical(node)
            if first is None or second is None or third is None:
                return None
            return ast.RangeExpr(start=first, stop=third, step=second, span=self.span_from(begin))
        if first is None or second is None:
            return None
        return ast.RangeExpr(start=first, stop=second, span=self.span_from(begin))

    def parse_logical(self, node: CstNode) -> Optional[ast.Expr]:
        begin = self.start()
        lhs = self.parse_logical_term(node)
        while self.at("or"):
            self.take(node)
            rhs = self.parse_logical_term(node)
            lhs = _bin("or", lhs, rhs, self.span_from(begin))
        return lhs

    def parse_logical_term(self, node: CstNode) -> Optional[ast.Expr]:
        begin = self.start()
        lhs = self.parse_logical_factor(node)
        while self.at("and"):
            self.take(node)
            rhs = self.parse_logical_factor(node)
            lhs = _bin("and", lhs, rhs, self.span_from(begin))
        return lhs

    def parse_logical_factor(self, node: CstNode) -> Optional[ast.Expr]:
        if self.at("not"):
            begin = self.start()
            self.take(node)
            operand = self.parse_relation(node)
            if operand is None:
                return None
            return ast.Unary(op="not", operand=operand, span=self.span_from(begin))
        return self.parse_relation(node)

    def parse_relation(self, node: CstNode) -> Optional[ast.Expr]:
        begin = self.start()
        lhs = self.parse_arith(node)
        if self.at_any(*RELATIONAL_OPS):
            op = self.take(node).text
            rhs = self.parse_arith(node)
            return _bin(op, lhs, rhs, self.span_from(begin))
        return lhs

    def parse_arith(self, node: CstNode) -> Optional[ast.Expr]:
        begin = self.start()
        lhs: Optional[ast.Expr]
        if self.at_any("+", "-", ".+", ".-"):
            op = self.take(node).text
            operand = self.parse_term(node)
            if operand is None:
                return None
            lhs = operand if op in ("+", ".+") else ast.Unary(op="-", operand=operand,
                                                              span=self.span_from(begin))
        else:
            lhs = self.parse_term(node)
        while self.at_any(*ADD_OPS):
            op = self.take(node).text
            rhs = self.parse_term(node)
            lhs = _bin(op, lhs, rhs, self.span_from(begin))
        return lhs

    def parse_term(self, node: CstNode) -> Optional[ast.Expr]:
        begin = self.start()
        lhs = self.parse_factor(node)
        while self.at_any(*MUL_OPS):
            op = self.take(node).text
            rhs = self.parse_factor(node)
            lhs = _bin(op, lhs, rhs, self.span_from(begin))
        return lhs

    def parse_factor(self, node: CstNode) -> Optional[ast.Expr]:
        begin = self.start()
        base = self.parse_primary(node)
        if self.at_any("^", ".^"):
            op = self.take(node).text
            exponent = self.parse_primary(node)
            return _bin(op, base, exponent, self.span_from(begin))
        return base

    def parse_primary(self, node: CstNode) -> Optional[ast.Expr]:
        begin = self.start()
        tok = self.peek()
        if tok.kind is TokenKind.NUMBER:
            self.take(node)
            return _number(tok, self.span_from(begin))
        if tok.kind is TokenKind.STRING:
            self.take(node)
            return ast.StringLit(unescape_string(tok.text), span=self.span_from(begin))
        if self.at("true") or self.at("false"):
            self.take(node)
            return ast.BoolLit(tok.text == "true", span=self.span_from(begin))
        if self.at("end"):
            self.take(node)
            return ast.EndExpr(span=self.span_from(begin))
        if self.at("("):
            self.take(node)
            elements: list[Optional[ast.Expr]] = []
            if self.at(")"):
                self.take(node)
                return ast.TupleExpr(elements=(), span=self.span_from(begin))
            while True:
                if self.at(","):
                    elements.append(None)
                else:
                    elements.append(self.expr_ast(self.parse_expression(node)))
                if self.at(","):
                    self.take(node)
                    continue
                break
            self.expect(node, ")")
            if len(elements) == 1:
                return self.maybe_postfix_index(node, elements[0], begin)
            return ast.TupleExpr(elements=tuple(elements), span=self.span_from(begin))
        if self.at("{"):
            self.take(node)
            elements: list[ast.Expr] = []
            iterators: tuple[ast.Iterator, ...] = ()
            if not self.at("}"):
                while True:
                    e = self.expr_ast(self.parse_expression(node))
                    if e is None:
                        self.skip_to(node, {",", "}", ";"})
                    else:
                        elements.append(e)
                    if self.at("for"):
                        self.take(node)
                        iterators = self.parse_for_indices(node)
                        break
                    if self.at(","):
                        self.take(node)
                        continue
                    break
            self.expect(node, "}")
            array = ast.ArrayExpr(elements=tuple(elements), iterators=iterators,
                                  span=self.span_from(begin))
            return self.maybe_postfix_index(node, array, begin)
        if self.at("["):
            self.take(node)
            rows: list[tuple[ast.Expr, ...]] = []
            row: list[ast.Expr] = []
            while not self.at_eof() and not self.at("]"):
                e = self.expr_ast(self.parse_expression(node))
                if e is None:
                    self.skip_to(node, {",", ";", "]"})
                else:
                    row.append(e)
                if self.at(","):
                    self.take(node)
                    continue
                if self.at(";"):
                    self.take(node)
                    rows.append(tuple(row))
                    row = []
                    continue
                break
            self.expect(node, "]")
            if row:
                rows.append(tuple(row))
            matrix = ast.MatrixExpr(rows=tuple(rows), span=self.span_from(begin))
            return self.maybe_postfix_index(node, matrix, begin)
        if self.at_ident() or self.at_any("der", "initial", "pure"):
            ref = self.parse_component_reference(node)
            if ref is None:
                return None
            if self.at("("):
                call = self.parse_function_call_args(node, ref, begin)
                return call
            return ref
        if self.at("."):
            ref = self.parse_component_reference(node)
            if ref is None:
                return None
            if self.at("("):
                return self.parse_function_call_args(node, ref, begin)
            return ref
        self.diag(SYN_PARSE_ERROR, "expected expression")
        err = CstNode("error", is_error=True)
        if not self.at_eof() and not self.at_any(";", ")", "}", "]", ",", "=", "then", "else",
                                                 "loop", "end"):
            err.children.append(self.peek())
            self.pos += 1
        else:
            err.children.append(Token(tok.kind, "", tok.start, tok.start))
        node.children.append(err)
        return None

    def maybe_postfix_index(self, node: CstNode, expr: Optional[ast.Expr],
                            begin: int) -> Optional[ast.Expr]:
        """Indexing applied to an array/matrix/parenthesized value."""
        if expr is None or not self.at("["):
            return expr
        subs = self.parse_array_subscripts(node)
        args: list[ast.Expr] = [expr]
        for s in subs:
            if isinstance(s, ast.Colon):
                self.diag(SYN_PARSE_ERROR, "':' subscript needs a named array")
                return None
            args.append(s)
        return ast.Call(callee=ast.Ref(parts=(ast.RefPart("__index__", ()),)),
                        args=tuple(args), span=self.span_from(begin))

    def parse_component_reference(self, node: CstNode) -> Optional[ast.Ref]:
        begin = self.start()
        global_ = False
        if self.at("."):
            self.take(node)
            global_ = True
        parts: list[ast.RefPart] = []
        while True:
            tok = self.peek()
            if not (tok.kind is TokenKind.IDENT or
                    (tok.kind is TokenKind.KEYWORD and tok.text in ("der", "initial"))):
                self.missing(node, "identifier")
                return None
            self.take(node)
            subs: tuple = ()
            if self.at("["):
                subs = self.parse_array_subscripts(node)
            parts.append(ast.RefPart(_ident_text(tok), tuple(subs)))
            if self.at(".") and (self.peek(1).kind is TokenKind.IDENT or
                                 self.peek(1).text in ("der", "initial")):
                self.take(node)
                continue
            break
        return ast.Ref(parts=tuple(parts), global_=global_, span=self.span_from(begin))

    def parse_function_call_args(self, node: CstNode, callee: ast.Ref, begin: int) -> Optional[ast.Call]:
        self.take(node)  # '('
        args: list[ast.Expr] = []
        named: list[tuple[str, ast.Expr]] = []
        iterators: tuple[ast.Iterator, ...] = ()
        broken = False
        if not self.at(")"):
            while not self.at_eof():
                if self.at("function"):
                    self.diag(SYN_UNSUPPORTED, "functional arguments are not supported")
                    self.skip_to(node, {",", ")"}, code=SYN_UNSUPPORTED,
                                 message="functional argument")
                    broken = True
                elif self.at_ident() and self.peek(1).text == "=" and self.peek(1).kind is TokenKind.OP:
                    name_tok = self.take(node)
                    self.take(node)  # '='
                    val = self.expr_ast(self.parse_expression(node))
                    if val is None:
                        broken = True
                    else:
                        named.append((_ident_text(name_tok), val))
                else:
                    val = self.expr_ast(self.parse_expression(node))
                    if val is None:
                        self.skip_to(node, {",", ")", ";"})
                        broken = True
                    else:
                        args.append(val)
                if self.at("for"):
                    self.take(node)
                    iterators = self.parse_for_indices(node)
                    break
                if self.at(","):
                    self.take(node)
                    continue
                break
        self.expect(node, ")")
        if broken:
            return None
        return ast.Call(callee=callee, args=tuple(args), named_args=tuple(named),
                        iterators=iterators, span=self.span_from(begin))

    def parse_array_subscripts(self, node: CstNode) -> tuple:
        subs: list = []
        self.take(node)  # '['
        while not self.at_eof() and not self.at("]"):
            if self.at(":") and self.peek(1).text in (",", "]"):
                tok = self.take(node)
                subs.append(ast.Colon(span=(tok.start, tok.end)))
            else:
                e = self.expr_ast(self.parse_expression(node))
                if e is None:
                    self.skip_to(node, {",", "]", ";"})
                else:
                    subs.append(e)
            if self.at(","):
                self.take(node)
                continue
            break
        self.expect(node, "]")
        return tuple(subs)

    # -- comments / annotations ---------------------------------------------------

    def parse_string_comment(self, node: CstNode) -> Optional[str]:
        if self.peek().kind is not TokenKind.STRING:
            return None
        parts = [unescape_string(self.take(node).text)]
        while self.at("+") and self.peek(1).kind is TokenKind.STRING:
            self.take(node)
            parts.append(unescape_string(self.take(node).text))
        return "".join(parts)

    def parse_comment(self, node: CstNode) -> tuple[Optional[str], Optional[ast.Modification]]:
        comment = self.parse_string_comment(node)
        annotation = self.parse_optional_annotation(node)
        return comment, annotation

    def parse_optional_annotation(self, node: CstNode) -> Optional[ast.Modification]:
        if self.at("annotation"):
            return self.parse_annotation(node)
        return None

    def parse_annotation(self, node: CstNode) -> ast.Modification:
        anode = CstNode("annotation")
        node.children.append(anode)
        self.take(anode)  # 'annotation'
        return self.parse_class_modification(anode)

    def parse_name(self, node: CstNode) -> str:
        parts = []
        tok = self.expect_ident(node)
        if tok is None:
            return ""
        parts.append(_ident_text(tok))
        while self.at(".") and self.peek(1).kind is TokenKind.IDENT:
            self.take(node)
            parts.append(_ident_text(self.take(node)))
        return ".".join(parts)


def _ident_text(tok: Token) -> str:
    if tok.text.startswith("'"):
        return unescape_string(tok.text)
    return tok.text


def _number(tok: Token, span: ast.Span) -> ast.Expr:
    text = tok.text
    if "." not in text and "e" not in text and "E" not in text:
        try:
            return ast.IntLit(int(text), span=span)
        except ValueError:
            pass
    try:
        return ast.RealLit(float(text), span=span)
    except ValueError:
        return ast.RealLit(0.0, span=span)


def _bin(op: str, lhs, rhs, span: ast.Span):
    if lhs is None or rhs is None:
        return None
    return ast.Binary(op=op, lhs=lhs, rhs=rhs, span=span)


def _replace(obj, **kwargs):
    import dataclasses

    return dataclasses.replace(obj, **kwargs)


def parse(text: str, uri: str = "<memory>") -> tuple[SyntaxTree, list[Diagnostic]]:
    """Parse Modelica source into a full-coverage syntax tree.

    Total: malformed regions become error nodes plus diagnostics.
    """
    parser = Parser(text, uri)
    root = parser.parse_stored_definition()
    stree = SyntaxTree(root=root, text=text, uri=uri, lower_diags=list(parser.lower_diags))
    return stree, list(parser.parse_diags)


def apply_edit(tree: SyntaxTree, span: tuple[int, int], new_text: str) -> tuple[SyntaxTree, list[Diagnostic]]:
    """Replace ``span`` of the tree's text and reparse.

    The contract is structural equality with a full reparse, which this
    implementation satisfies by construction.
    """
    start, end = span
    if not (0 <= start <= end <= len(tree.text)):
        raise ValueError(f"edit span {span} out of range for text of length {len(tree.text)}")
    edited = tree.text[:start] + new_text + tree.text[end:]
    return parse(edited, getattr(tree, "uri", "<memory>"))


def lower(tree: SyntaxTree, uri: str = "<memory>") -> tuple[ast.StoredDefinition, list[Diagnostic]]:
    """Extract the AST lowered from a parse, with lowering diagnostics."""
    stored = getattr(tree.root, "ast", None)
    if stored is None:
        stored = ast.StoredDefinition()
    diags = list(getattr(tree, "lower_diags", []))
    if uri != "<memory>" and getattr(tree, "uri", uri) != uri:
        diags = [Diagnostic(uri, d.start, d.end, d.severity, d.code, d.message) for d in diags]
    return stored, diags
