from hypothesis import given, settings, strategies as st

import oracles
from conftest import CORPUS, ROBUST
from droidsmell.bundle import discover_bundle, discover_corpus
from droidsmell.smali import (
    MethodRef,
    SmaliMethod,
    argument_registers,
    build_index,
    parse_instruction,
    parse_smali_file,
    resolve_constant,
    trivial_body,
    unescape_smali,
)

BS = "\\"


def parse(text, path="smali/T.smali"):
    cls, diags = parse_smali_file(text, path)
    return cls, diags


def index_bundle(bundle_dir):
    b = discover_bundle(bundle_dir)
    classes = [c for c, _ in (parse_smali_file(t, p) for p, t in b.smali_files) if c is not None]
    return build_index(classes)[0]


def body_method(*lines, flags=frozenset({"public"})):
    instrs = tuple(parse_instruction(t, n + 1)[0] for n, t in enumerate(lines))
    return SmaliMethod("m", "()V", flags, instrs, 1)


# ---------------------------------------------------------------- grammar

def test_class_header():
    cls, diags = parse(".class public final Lcom/a/B;\n.super Lcom/a/Base;\n"
                       ".implements Ljava/lang/Runnable;\n.source \"B.java\"\n")
    assert cls.name == "Lcom/a/B;"
    assert cls.super_name == "Lcom/a/Base;"
    assert cls.interfaces == {"Ljava/lang/Runnable;"}
    assert diags == []


def test_invoke_method_ref():
    instr, problem = parse_instruction(
        "invoke-virtual {v0}, Landroid/telephony/TelephonyManager;->getDeviceId()Ljava/lang/String;", 7)
    assert problem is None
    assert instr.method_ref == MethodRef("Landroid/telephony/TelephonyManager;", "getDeviceId", "()Ljava/lang/String;")
    assert instr.registers == ("v0",)
    assert instr.string_literal is None and instr.const_value is None


def test_invoke_range_registers():
    instr, _ = parse_instruction("invoke-static/range {v3 .. v6}, La/B;->f(IIII)V", 1)
    assert instr.registers == ("v3", "v4", "v5", "v6")


def test_const_string_example():
    instr, _ = parse_instruction('const-string v1, "http://a.b/\\"x\\""', 3)
    assert instr.string_literal == 'http://a.b/"x"'
    assert instr.method_ref is None and instr.const_value is None


def test_const_string_jumbo():
    instr, _ = parse_instruction('const-string/jumbo v2, "a\\nb"', 3)
    assert instr.string_literal == "a\nb"


def test_const_values():
    assert parse_instruction("const/4 v0, 0x1", 1)[0].const_value == 1
    assert parse_instruction("const/4 v0, -0x1", 1)[0].const_value == -1
    assert parse_instruction("const/16 v4, 0x1bb", 1)[0].const_value == 443
    assert parse_instruction("const v1, 0x8000", 1)[0].const_value == 0x8000


def test_other_lines_opaque():
    instr, problem = parse_instruction("move-result-object v0", 1)
    assert problem is None
    assert (instr.mnemonic, instr.raw_text) == ("move-result-object", "move-result-object v0")
    assert instr.method_ref is None and instr.string_literal is None and instr.const_value is None


def test_fields_populated_only_by_mnemonic_family():
    cases = {
        "invoke-direct {p0}, Ljava/lang/Object;-><init>()V": {"method_ref"},
        'const-string v0, "x"': {"string_literal"},
        "const/4 v0, 0x0": {"const_value"},
        "return-void": set(),
        "throw v0": set(),
        "nop": set(),
        "if-eqz v0, :cond_0": set(),
    }
    for text, expected in cases.items():
        instr, _ = parse_instruction(text, 1)
        populated = {k for k in ("method_ref", "string_literal", "const_value") if getattr(instr, k) is not None}
        assert populated == expected, text


def test_annotation_and_switch_blocks_skipped():
    text = (".class public LA;\n.super Ljava/lang/Object;\n"
            ".annotation system Ldalvik/annotation/Signature;\n    value = {\n        \"invoke-virtual\"\n    }\n"
            ".end annotation\n"
            ".method public f(I)V\n    .locals 1\n"
            "    .annotation runtime LX;\n    .end annotation\n"
            "    packed-switch p1, :pswitch_data_0\n"
            "    return-void\n"
            "    :pswitch_data_0\n    .packed-switch 0x0\n        :pswitch_0\n    .end packed-switch\n"
            ".end method\n")
    cls, diags = parse(text)
    assert diags == []
    assert [i.mnemonic for i in cls.methods[0].instructions] == ["packed-switch", "return-void"]


def test_line_numbers_are_physical():
    cls, _ = parse(".class LA;\n.super Ljava/lang/Object;\n\n.method static f()V\n    .locals 0\n\n"
                   "    return-void\n.end method\n")
    m = cls.methods[0]
    assert m.line_of_declaration == 4
    assert m.instructions[0].line == 7
    assert m.is_static


def test_arbitrary_text_never_raises():
    cls, diags = parse("\x00garbage\n.method\n.end method\n")
    assert cls is None and diags


def test_resynchronisation_keeps_other_methods():
    path = ROBUST / "c_bad_smali" / "smali/com/fx/badsmali/Mixed.smali"
    cls, diags = parse(path.read_text(), "smali/com/fx/badsmali/Mixed.smali")
    assert [m.name for m in cls.methods] == ["imei", "garbled", "net"]
    assert {d.line for d in diags} == {4, 22, 23}


def test_unterminated_method_reported():
    cls, diags = parse(".class LA;\n.super LB;\n.method f()V\n    return-void\n.method g()V\n    return-void\n")
    assert [m.name for m in cls.methods] == ["f", "g"]
    assert len(diags) == 2


# ---------------------------------------------------------------- unescape

def test_unescape_basic():
    assert unescape_smali(BS + '"' + BS + "n" + BS + BS) == '"\n\\'
    assert unescape_smali(BS + "u0041" + BS + "u00e9") == "A" + chr(0xE9)
    assert unescape_smali(BS + "ud83d" + BS + "ude00") == chr(0x1F600)
    assert unescape_smali(BS + "q") == BS + "q"
    assert unescape_smali("tail" + BS) == "tail" + BS


escape_piece = st.one_of(
    st.sampled_from([BS + c for c in 'ntrbf"\'\\qz0u']),
    st.integers(0, 0xFFFF).map(lambda cp: BS + "u" + format(cp, "04x")),
    st.integers(0xD800, 0xDBFF).map(lambda cp: BS + "u" + format(cp, "04X")),
    st.text(alphabet=st.characters(blacklist_characters=BS, blacklist_categories=("Cs",)), max_size=3),
)


@settings(max_examples=300)
@given(st.lists(escape_piece, max_size=12).map("".join))
def test_unescape_matches_reference(body):
    assert unescape_smali(body) == oracles.unescape(body)


def test_unescape_fixture_literals_match_reference():
    checked = 0
    for bundle_dir in discover_corpus(CORPUS):
        index = index_bundle(bundle_dir)
        by_loc = {(s.source_path, s.line): s.value for s in index.string_literals}
        for path, line, body in oracles.const_string_bodies(bundle_dir):
            assert by_loc[(path, line)] == oracles.unescape(body)
            checked += oracles.has_escape(body)
    # frozen from the oracle: every escape-bearing literal in the corpus
    assert checked == 60


# ---------------------------------------------------------------- constants

def test_resolve_constant_nearest_write():
    m = body_method("const/4 v1, 0x1", "invoke-static {}, La/B;->f()Z", "move-result v1",
                    "invoke-virtual {v0, v1}, La/S;->set(Z)V")
    assert resolve_constant(m, 3, "v1") is None
    assert resolve_constant(m, 1, "v1") == 1
    assert resolve_constant(m, 3, "v9") is None


def test_resolve_constant_ignores_reads_and_puts():
    m = body_method("const/4 v1, 0x2", "sput v1, La/B;->x:I", "if-eqz v1, :c", "invoke-static {v1}, La/B;->f(I)V")
    assert resolve_constant(m, 3, "v1") == 2


def test_resolve_constant_wide_write_clobbers_next_register():
    m = body_method("const/4 v1, 0x1", "move-result-wide v0", "invoke-static {v1}, La/B;->f(I)V")
    assert resolve_constant(m, 2, "v1") is None


def test_argument_registers():
    instr, _ = parse_instruction("invoke-virtual {p0, v0, v1}, La/C;->f(Ljava/lang/String;I)V", 1)
    assert argument_registers(instr) == [("Ljava/lang/String;", "v0"), ("I", "v1")]
    wide, _ = parse_instruction("invoke-static {v0, v1, v2}, La/C;->g(JI)V", 1)
    assert argument_registers(wide) == [("J", "v0"), ("I", "v2")]
    bad, _ = parse_instruction("invoke-static {v0}, La/C;->g(JI)V", 1)
    assert argument_registers(bad) == []


# ---------------------------------------------------------------- trivial_body

def test_trivial_body_examples():
    assert trivial_body(body_method("return-void"))
    assert not trivial_body(body_method("new-instance v0, Ljava/lang/Exception;", "throw v0"))
    assert trivial_body(body_method("const/4 v0, 0x1", "return v0"))


def test_trivial_body_other_cases():
    assert trivial_body(body_method("return p1"))
    assert not trivial_body(body_method("invoke-static {}, La/B;->f()Z", "move-result v0", "return v0"))
    assert not trivial_body(body_method("array-length v0, p1", "return v0"))
    assert not trivial_body(body_method())


# ---------------------------------------------------------------- index

def test_two_classes_one_invoke():
    a, _ = parse(".class LA;\n.super Ljava/lang/Object;\n.method f()V\n    invoke-static {}, LB;->g()V\n"
                 "    return-void\n.end method\n", "smali/A.smali")
    b, _ = parse(".class LB;\n.super Ljava/lang/Object;\n.method static g()V\n    return-void\n.end method\n",
                 "smali/B.smali")
    index, diags = build_index([a, b])
    assert sum(len(v) for v in index.invokes.values()) == 1
    (site,) = index.invokes[("LB;", "g")]
    assert (site.source_path, site.line, site.class_name, site.method) == ("smali/A.smali", 4, "LA;", "f()V")


def test_implementors_is_transpose_of_interfaces():
    index = index_bundle(CORPUS / "cert_negative")
    assert index.implementors["Ljavax/net/ssl/X509TrustManager;"] == {"Lcom/fx/trustok/PinnedTrust;"}
    for iface, names in index.implementors.items():
        assert names == {c.name for c in index.classes() if iface in c.interfaces}
    assert {i for c in index.classes() for i in c.interfaces} == set(index.implementors)


def test_duplicate_class_first_wins():
    a, _ = parse(".class LA;\n.super LX;\n", "smali/A.smali")
    b, _ = parse(".class LA;\n.super LY;\n", "smali/Z.smali")
    index, diags = build_index([a, b])
    assert index.classes_by_name["LA;"].super_name == "LX;"
    assert diags[0].message.startswith("DuplicateClass")


def test_invoke_count_on_17_line_subset():
    bundles = ["cert_negative", "xss", "weak_digest"]
    oracle = sum(len(oracles.invoke_lines(CORPUS / b)) for b in bundles)
    indexed = sum(len(index_bundle(CORPUS / b).all_invokes()) for b in bundles)
    assert oracle == 17
    assert indexed == 17


def test_index_matches_line_scanning_oracle():
    total = 0
    for bundle_dir in discover_corpus(CORPUS):
        index = index_bundle(bundle_dir)
        got = [(s.source_path, s.line, str(s.ref)) for s in index.all_invokes()]
        assert got == oracles.invoke_lines(bundle_dir), bundle_dir.name
        total += len(got)
    assert total == 140  # frozen from the oracle


def test_verbatim_reconstruction():
    for bundle_dir in discover_corpus(CORPUS):
        for site in index_bundle(bundle_dir).all_invokes():
            assert site.raw_text.split("}, ", 1)[1] == str(site.ref)


def test_index_iteration_sorted():
    index = index_bundle(CORPUS / "library_plant")
    sites = index.all_invokes()
    assert sites == sorted(sites, key=lambda s: (s.source_path, s.line))
    lits = index.string_literals
    assert lits == sorted(lits, key=lambda s: (s.source_path, s.line))


@settings(max_examples=25, deadline=None)
@given(st.sets(st.sampled_from(sorted(p.name for p in CORPUS.iterdir())), min_size=1, max_size=6))
def test_adding_files_never_removes_index_entries(names):
    files = []
    for n in sorted(names):
        b = discover_bundle(CORPUS / n)
        files.extend((f"{n}/{p}", t) for p, t in b.smali_files)
    classes = [c for c, _ in (parse_smali_file(t, p) for p, t in files) if c is not None]
    small, _ = build_index(classes[: len(classes) // 2])
    big, _ = build_index(classes)
    for key, sites in small.invokes.items():
        assert set(sites) <= set(big.invokes[key])
    assert set(small.string_literals) <= set(big.string_literals)
    for iface, names_ in small.implementors.items():
        assert names_ <= big.implementors[iface]
