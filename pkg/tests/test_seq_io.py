import numpy as np
import pytest

from argkit.seq_io import (
    BUILTIN_SCHEMAS,
    Axis,
    HeaderMismatch,
    HeaderSchema,
    LabelSet,
    MalformedFasta,
    Role,
    SequenceRecord,
    SourceDb,
    decode_bases,
    encode_bases,
    load_card_metadata,
    normalize_sequence,
    parse_fasta,
    parse_header,
    reverse_complement,
    serialize_fasta,
    truncate,
    was_truncated,
)


class TestNormalize:
    def test_uppercase_and_u_to_t(self):
        assert normalize_sequence("acgu") == "ACGT"

    def test_ambiguity_codes_become_n(self):
        assert normalize_sequence("ARYSWKMBDHVN") == "ANNNNNNNNNNN"

    def test_invalid_character_raises_with_line(self):
        with pytest.raises(MalformedFasta, match="line 7"):
            normalize_sequence("ACGX", line=7)


class TestFasta:
    def test_round_trip(self):
        pairs = [("first|rec", "ACGT" * 40), ("second", "TTTT")]
        assert parse_fasta(serialize_fasta(pairs)) == pairs

    def test_multiline_and_blank_lines(self):
        text = ">a\nAC\n\nGT\n>b\nTT\n"
        assert parse_fasta(text) == [("a", "ACGT"), ("b", "TT")]

    def test_accepts_file_handle(self, tmp_path):
        p = tmp_path / "x.fasta"
        p.write_text(">a\nACGT\n")
        with open(p) as fh:
            assert parse_fasta(fh) == [("a", "ACGT")]

    def test_empty_header_rejected(self):
        with pytest.raises(MalformedFasta, match="empty header"):
            parse_fasta(">\nACGT\n")

    def test_empty_body_rejected(self):
        with pytest.raises(MalformedFasta, match="empty sequence body"):
            parse_fasta(">a\n>b\nACGT\n")

    def test_content_before_first_header_rejected(self):
        with pytest.raises(MalformedFasta, match="before first"):
            parse_fasta("ACGT\n>a\nACGT\n")

    def test_sequences_are_normalized(self):
        assert parse_fasta(">a\nacg u\n") == [("a", "ACGT")]


class TestSchemas:
    def test_megares_header(self):
        rid, labels = parse_header(
            "MEG_1|Drugs|Aminoglycosides|A16S|GeneGrp", BUILTIN_SCHEMAS["megares"]
        )
        assert rid == "MEG_1"
        assert labels.drug_class == "Aminoglycosides"
        assert labels.resistance_mechanism == "A16S"
        assert labels.gene_family == "GeneGrp"

    def test_megares_flag_is_removed_before_assignment(self):
        with_flag = "MEG_2|Drugs|Aminoglycosides|RequiresSNPConfirmation|A16S|GeneGrp"
        rid, labels = parse_header(with_flag, BUILTIN_SCHEMAS["megares"])
        assert rid == "MEG_2"
        assert labels.resistance_mechanism == "A16S"

    def test_missing_trailing_fields_are_absent(self):
        rid, labels = parse_header("MEG_3|Drugs|Aminoglycosides", BUILTIN_SCHEMAS["megares"])
        assert rid == "MEG_3"
        assert labels.resistance_mechanism is None and labels.gene_family is None

    def test_card_header_takes_accession(self):
        header = "gb|GQ343019.1|+|132-1023|ARO:3002999|CblA-1 [Bacteroides uniformis]"
        rid, labels = parse_header(header, BUILTIN_SCHEMAS["card"])
        assert rid == "ARO:3002999"
        assert not labels.has_any()

    def test_header_without_id_field(self):
        with pytest.raises(HeaderMismatch):
            parse_header("gb|x", BUILTIN_SCHEMAS["card"])

    def test_schema_validation(self):
        with pytest.raises(ValueError, match="single character"):
            HeaderSchema("x", "||", (Role.ID,))
        with pytest.raises(ValueError, match="exactly one ID"):
            HeaderSchema("x", "|", (Role.IGNORE,))
        with pytest.raises(ValueError, match="repeats role"):
            HeaderSchema("x", "|", (Role.ID, Role.TYPE, Role.TYPE))

    def test_schema_from_config(self, tmp_path):
        cfg = tmp_path / "schema.cfg"
        cfg.write_text(
            "# custom layout\nname=custom\ndelimiter=;\nroles=ID,DRUG_CLASS\nflags=SKIP\n"
        )
        schema = HeaderSchema.from_config(cfg)
        assert schema.delimiter == ";"
        rid, labels = parse_header("g1;tet", schema)
        assert (rid, labels.drug_class) == ("g1", "tet")


class TestRecords:
    def test_record_validates_alphabet(self):
        with pytest.raises(ValueError, match="invalid bases"):
            SequenceRecord(id="a", header="a", nucleotides="ACGX", source_db=SourceDb.CARD)
        with pytest.raises(ValueError, match="non-empty"):
            SequenceRecord(id="", header="a", nucleotides="ACG", source_db=SourceDb.CARD)

    def test_labelset_axis_accessors(self):
        ls = LabelSet(drug_class="tet")
        assert ls.get(Axis.DRUG_CLASS) == "tet"
        ls2 = ls.replace(Axis.MECHANISM, "efflux")
        assert ls2.resistance_mechanism == "efflux" and ls2.drug_class == "tet"
        assert ls2.replace(Axis.DRUG_CLASS, None).drug_class is None


def test_truncate_keeps_prefix():
    seq = "A" * 1500
    assert truncate(seq) == "A" * 1000
    assert was_truncated(seq)
    assert truncate("ACGT", 1000) == "ACGT"
    assert not was_truncated("ACGT", 1000)


def test_reverse_complement():
    assert reverse_complement("ACGTN") == "NACGT"
    assert reverse_complement("") == ""
    seq = "ACCGGGTTTTN"
    assert reverse_complement(reverse_complement(seq)) == seq


def test_encode_decode_round_trip():
    seq = "ACGTNACGT"
    codes = encode_bases(seq)
    assert codes.dtype == np.uint8
    assert codes.tolist() == [0, 1, 2, 3, 4, 0, 1, 2, 3]
    assert decode_bases(codes) == seq


def test_card_metadata_sidecar(tmp_path):
    p = tmp_path / "meta.tsv"
    p.write_text(
        "# accession\tdrug\tfamily\tmechanism\n"
        "ARO:1\ttetracycline\ttet(X)\tantibiotic inactivation\n"
        "ARO:2\t\tblaZ\t\n"
    )
    table = load_card_metadata(p)
    assert table["ARO:1"].drug_class == "tetracycline"
    assert table["ARO:2"].drug_class is None
    assert table["ARO:2"].gene_family == "blaZ"
