import pytest

from varnamer import javalex
from varnamer.errors import MalformedCode


def spans_text(code, occurrence):
    return [code[a:b] for a, b in occurrence.spans]


class TestExtractVariables:
    def test_simple_declaration_and_use(self):
        code = "int count = 0; count++;"
        result = javalex.extract_variables(code)
        assert len(result) == 1
        assert result[0].name == "count"
        # hand-traced offsets: declaration at 4..9, increment at 15..20
        assert result[0].spans == ((4, 9), (15, 20))

    def test_no_declarations(self):
        assert javalex.extract_variables("void f(){}") == []

    def test_for_loop_and_preceding_declaration(self):
        code = "int sum=0; for(int i=0;i<n;i++){sum+=i;}"
        by_name = {v.name: v for v in javalex.extract_variables(code)}
        assert set(by_name) == {"sum", "i"}
        assert len(by_name["i"].spans) == 4
        assert len(by_name["sum"].spans) == 2
        for occ in by_name.values():
            assert all(code[a:b] == occ.name for a, b in occ.spans)

    def test_parameters_are_variables(self):
        code = "int f(int first, String second) {\n  return first;\n}"
        by_name = {v.name: v for v in javalex.extract_variables(code)}
        assert set(by_name) == {"first", "second"}
        assert len(by_name["first"].spans) == 2

    def test_strings_and_comments_not_scanned(self):
        code = (
            'int f() {\n'
            '  int count = 1; // count here\n'
            '  String s = "count";\n'
            '  /* count */\n'
            '  return count;\n'
            '}'
        )
        by_name = {v.name: v for v in javalex.extract_variables(code)}
        assert len(by_name["count"].spans) == 2
        assert spans_text(code, by_name["count"]) == ["count", "count"]

    def test_method_calls_and_field_access_excluded(self):
        code = (
            "int f(Thing count) {\n"
            "  other.count = 1;\n"
            "  count();\n"
            "  return count;\n"
            "}"
        )
        by_name = {v.name: v for v in javalex.extract_variables(code)}
        # declaration + the plain return use; not the field or the call
        assert len(by_name["count"].spans) == 2

    def test_multi_declarators(self):
        code = "int a = 1, b = 2, c;\nint d;\nuse(a, b, c, d);\n"
        names = {v.name for v in javalex.extract_variables(code)}
        assert names == {"a", "b", "c", "d"}

    def test_enhanced_for_and_generics(self):
        code = (
            "void f(Map<String, List<Integer>> table) {\n"
            "  for (Map.Entry<String, List<Integer>> entry : table.entrySet()) {\n"
            "    use(entry);\n"
            "  }\n"
            "}"
        )
        by_name = {v.name: v for v in javalex.extract_variables(code)}
        assert set(by_name) == {"table", "entry"}
        assert len(by_name["entry"].spans) == 2

    def test_comparison_is_not_generics(self):
        code = "void f(int a, int b, int c, int d) { if (a < b && c > d) { a = d; } }"
        by_name = {v.name: v for v in javalex.extract_variables(code)}
        assert set(by_name) == {"a", "b", "c", "d"}
        assert len(by_name["d"].spans) == 3  # param, comparison, assignment

    def test_empty_input_rejected(self):
        with pytest.raises(MalformedCode):
            javalex.extract_variables("   \n  ")

    def test_unbalanced_braces_rejected(self):
        with pytest.raises(MalformedCode):
            javalex.extract_variables("void f() { if (x) { }")
        with pytest.raises(MalformedCode):
            javalex.extract_variables("void f() } {")

    def test_idempotent_and_pure(self):
        code = "int f(int x) {\n  int y = x;\n  return y;\n}"
        assert javalex.extract_variables(code) == javalex.extract_variables(code)

    def test_spans_slice_back_to_name(self, toy_functions):
        for code in toy_functions[:20]:
            for occ in javalex.extract_variables(code):
                assert all(code[a:b] == occ.name for a, b in occ.spans)


class TestFindOccurrences:
    def test_undeclared_name_found_lexically(self):
        code = "int f() { use(widget); widget = 3; }"
        spans = javalex.find_identifier_occurrences(code, "widget")
        assert [code[a:b] for a, b in spans] == ["widget", "widget"]

    def test_substitute_roundtrip(self):
        code = "int count = 0; count++;"
        spans = javalex.find_identifier_occurrences(code, "count")
        replaced = javalex.substitute(code, spans, "total")
        assert replaced == "int total = 0; total++;"
        back = javalex.substitute(
            replaced, javalex.find_identifier_occurrences(replaced, "total"), "count")
        assert back == code
