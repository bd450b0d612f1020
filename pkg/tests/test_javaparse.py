"""Parser-level behavior: tree shape, spans, error tolerance."""

import pytest

from j2cj.javaparse import SyntaxNode, count_internal_nodes, parse, tree_has_errors


def kinds(node: SyntaxNode) -> list[str]:
    return [child.category for child in node.children]


def test_minimal_class_shape():
    root = parse("class A {}")
    assert root.category == "program"
    assert not root.is_terminal
    decl = root.children[0]
    assert decl.category == "class_declaration"
    assert kinds(decl) == ["class", "identifier", "class_body"]


def test_empty_source_has_no_children():
    root = parse("")
    assert root.children == []
    assert not tree_has_errors(root)


def test_unparseable_fragment_produces_error_node():
    root = parse("int x = ;")
    assert tree_has_errors(root)


def test_terminal_nodes_have_no_children():
    root = parse("class A { int f(int x) { return x + 1; } }")
    for node in root.walk():
        if node.is_terminal:
            assert node.children == []


def test_child_spans_are_ordered_and_contained():
    source = "class A { void m() { int total = 1 + 2; } }"
    root = parse(source)
    for node in root.walk():
        lo, hi = node.span
        assert lo <= hi
        previous_end = lo
        for child in node.children:
            assert child.span[0] >= previous_end
            assert child.span[1] <= hi
            previous_end = child.span[1]


def test_spans_are_byte_offsets():
    source = 'class A { String s = "héllo"; }'
    root = parse(source)
    data = source.encode("utf-8")
    leaves = [n for n in root.walk() if n.is_terminal]
    string_leaf = next(n for n in leaves if n.category == "string_literal")
    assert data[string_leaf.span[0] : string_leaf.span[1]].decode("utf-8") == '"héllo"'


def test_comments_and_strings_do_not_confuse_structure():
    source = """
    class A {
        // a comment with } and {
        /* another { */
        String s = "a } b { c;";
        char c = '{';
        void m() { }
    }
    """
    root = parse(source)
    assert not tree_has_errors(root)
    categories = [n.category for n in root.walk()]
    assert categories.count("method_declaration") == 1
    assert categories.count("class_body") == 1


def test_nested_generics_do_not_become_shift_operators():
    root = parse("class A { Map<String, List<Integer>> index = new HashMap<>(); }")
    assert not tree_has_errors(root)
    assert any(n.category == "generic_type" for n in root.walk())


def test_constructor_vs_method_distinction():
    root = parse("class A { A() {} int f() { return 0; } }")
    categories = [n.category for n in root.walk()]
    assert categories.count("constructor_declaration") == 1
    assert categories.count("method_declaration") == 1


def test_enhanced_for_and_classic_for():
    root = parse("class A { void m(int[] xs) { for (int x : xs) {} for (int i = 0; i < 2; i++) {} } }")
    categories = [n.category for n in root.walk()]
    assert categories.count("enhanced_for_statement") == 1
    assert categories.count("for_statement") == 1


def test_ternary_in_for_init_is_not_enhanced():
    root = parse("class A { void m(boolean b) { for (int i = b ? 1 : 0; i < 2; i++) {} } }")
    categories = [n.category for n in root.walk()]
    assert categories.count("for_statement") == 1
    assert categories.count("enhanced_for_statement") == 0


def test_wildcard_generic_in_enhanced_for_header():
    root = parse("class A { void m(List<List<? extends Number>> ls) { for (List<? extends Number> l : ls) {} } }")
    categories = [n.category for n in root.walk()]
    assert categories.count("enhanced_for_statement") == 1


def test_anonymous_class_body_is_discovered():
    root = parse("class A { Object o = new Runnable() { public void run() {} }; }")
    categories = [n.category for n in root.walk()]
    assert categories.count("class_body") == 2
    assert categories.count("method_declaration") == 1


def test_lambda_parameter_varieties():
    source = """
    class A {
        Runnable a = () -> {};
        F b = x -> x;
        G c = (int u, int v) -> u + v;
        H d = (p, q) -> p;
    }
    """
    root = parse(source)
    lambdas = [n for n in root.walk() if n.category == "lambda_expression"]
    assert len(lambdas) == 4
    param_kinds = sorted(l.children[0].category for l in lambdas)
    assert param_kinds == ["formal_parameters", "formal_parameters", "identifier", "inferred_parameters"]


def test_array_creation_initializer_is_not_a_class_body():
    root = parse("class A { int[] xs = new int[]{1, 2}; }")
    categories = [n.category for n in root.walk()]
    assert "array_initializer" in categories
    assert categories.count("class_body") == 1


def test_error_recovery_resumes_at_next_member():
    source = "class B { void f( { int x = ; } int ok() { return 1; } }"
    root = parse(source)
    assert tree_has_errors(root)
    methods = [n for n in root.walk() if n.category == "method_declaration"]
    assert any(not tree_has_errors(m) for m in methods)


def test_parser_always_terminates_on_garbage():
    for garbage in ["}}}", "((((", "class", "@@@ ???", "int int int", "\x00\x01", "“smart quotes”"]:
        root = parse(garbage)
        assert isinstance(root, SyntaxNode)


def test_internal_node_count_bounds_walk():
    source = "class A { void m() { if (x) { y(); } } }"
    root = parse(source)
    internal = count_internal_nodes(root)
    total = sum(1 for _ in root.walk())
    assert 0 < internal < total


@pytest.mark.parametrize(
    "source,expected",
    [
        ("package com.example.app;", "package_declaration"),
        ("import java.util.List;", "import_declaration"),
        ("import static java.lang.Math.max;", "import_declaration"),
    ],
)
def test_header_declarations(source, expected):
    root = parse(source)
    assert root.children[0].category == expected


def test_interface_enum_record_annotations():
    source = """
    @interface Marker { int value(); }
    interface I extends Other { default int f() { return 1; } }
    enum E implements I { A(1), B(2) { int g() { return 2; } }; E(int v) {} }
    record Point(int x, int y) { int sum() { return x + y; } }
    """
    root = parse(source)
    categories = [n.category for n in root.walk()]
    for expected in (
        "annotation_type_declaration",
        "interface_declaration",
        "interface_body",
        "enum_declaration",
        "enum_body",
        "enum_constant",
        "record_declaration",
        "constructor_declaration",
    ):
        assert expected in categories, expected
