import json

import numpy as np
import pytest

from memaudit.binio import FormatError
from memaudit.index import (CorpusFormatError, Document, RetrievalConfig, build_index, count_occurrences,
                            find_documents, load_corpus_jsonl, load_index, retrieve_candidates, save_index,
                            write_corpus_jsonl)
from memaudit.lm.vocab import Vocabulary

from oracles import brute_shingle_candidates, naive_count, naive_occurrences


def random_corpus(rng, n_docs, max_len, vocab):
    return [Document(i, tuple(rng.integers(0, vocab, size=int(rng.integers(1, max_len + 1))).tolist()))
            for i in range(n_docs)]


def test_single_tiny_doc_suffix_order(backend):
    idx = build_index([Document(0, (1, 2, 3))])
    # text is 1 2 3 ⊥ with ⊥ = 4; suffixes in order: "1 2 3 ⊥", "2 3 ⊥", "3 ⊥", "⊥"
    assert idx.text.tolist() == [1, 2, 3, 4]
    assert idx.suffix_order.tolist() == [0, 1, 2, 3]


def test_overlapping_occurrences(backend):
    idx = build_index([Document(0, (2, 2, 2))])
    assert count_occurrences(idx, [2, 2]) == 2


def test_absent_and_whole_document_queries(backend):
    docs = [Document(0, (1, 2, 3)), Document(1, (4, 5))]
    idx = build_index(docs)
    assert count_occurrences(idx, [3, 1]) == 0
    assert count_occurrences(idx, [4, 5]) == 1


def test_constructed_placement():
    docs = [Document(i, (9,) * 12) for i in range(5)]
    d3 = [9] * 7 + [1, 2, 3] + [9] * 2
    docs[3] = Document(3, tuple(d3))
    idx = build_index(docs)
    assert find_documents(idx, [1, 2, 3]) == [(3, [7])]


def test_no_cross_document_matches():
    idx = build_index([Document(0, (1, 2)), Document(1, (3, 4))])
    assert count_occurrences(idx, [2, 3]) == 0
    assert find_documents(idx, [2, 3]) == []


def test_random_corpora_against_naive_scan(backend):
    rng = np.random.default_rng(0)
    docs = random_corpus(rng, 100, 64, 16)
    idx = build_index(docs)
    for _ in range(1000):
        q = rng.integers(0, 16, size=int(rng.integers(1, 5))).tolist()
        occ = naive_occurrences(docs, q)
        assert count_occurrences(idx, q) == sum(len(v) for v in occ.values())
        assert find_documents(idx, q) == sorted(occ.items())


def test_errors():
    with pytest.raises(ValueError):
        build_index([])
    v = Vocabulary.synthetic(8)
    with pytest.raises(ValueError):
        build_index([Document(0, (1, v.sentinel_id))], v)
    idx = build_index([Document(0, (1, 2))])
    with pytest.raises(ValueError):
        count_occurrences(idx, [])
    with pytest.raises(ValueError):
        find_documents(idx, [])
    with pytest.raises(ValueError):
        count_occurrences(idx, [idx.sentinel])
    with pytest.raises(ValueError):
        build_index([Document(0, (1,)), Document(0, (2,))])
    with pytest.raises(ValueError):
        Document(0, ())


def test_retrieval_filters_repetitive_generation():
    idx = build_index([Document(0, tuple(range(20)))])
    assert retrieve_candidates(idx, [3] * 100, RetrievalConfig(pre_filter_diversity_threshold=0.1)) == []


def test_retrieval_finds_verbatim_copy():
    rng = np.random.default_rng(2)
    docs = random_corpus(rng, 10, 40, 50)
    docs[5] = Document(5, tuple(rng.integers(0, 50, size=40).tolist()))
    gen = rng.integers(0, 50, size=7).tolist() + list(docs[5].tokens[3:13]) + rng.integers(0, 50, size=9).tolist()
    got = retrieve_candidates(build_index(docs), gen, RetrievalConfig(shingle_length=10, shingle_stride=1))
    assert 5 in got


def test_retrieval_against_bruteforce(backend):
    rng = np.random.default_rng(9)
    for trial in range(20):
        docs = random_corpus(rng, 30, 50, 4)
        idx = build_index(docs)
        cfg = RetrievalConfig(shingle_length=int(rng.integers(2, 5)), shingle_stride=int(rng.integers(1, 4)),
                              max_candidates=int(rng.integers(1, 10)), pre_filter_diversity_threshold=0.0)
        gen = rng.integers(0, 4, size=60).tolist()
        assert retrieve_candidates(idx, gen, cfg) == brute_shingle_candidates(
            docs, gen, cfg.shingle_length, cfg.shingle_stride, cfg.max_candidates)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    docs = random_corpus(rng, 20, 30, 8)
    idx = build_index(docs)
    p = tmp_path / "i.bin"
    save_index(idx, p)
    idx2 = load_index(p)
    for _ in range(100):
        q = rng.integers(0, 8, size=3).tolist()
        assert find_documents(idx2, q) == find_documents(idx, q)
    assert idx2.documents() == docs
    save_index(idx2, tmp_path / "j.bin")
    assert (tmp_path / "j.bin").read_bytes() == p.read_bytes()


def test_load_rejects_other_files(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"not an index")
    with pytest.raises(FormatError):
        load_index(p)


def test_corpus_jsonl_text_and_tokens(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text(json.dumps({"doc_id": 0, "text": "hi"}) + "\n\n" + json.dumps({"doc_id": 1, "tokens": [1, 2]}) + "\n")
    docs = load_corpus_jsonl(p)
    v = Vocabulary.default()
    assert docs == [Document(0, tuple(v.encode("hi"))), Document(1, (1, 2))]
    q = tmp_path / "d.jsonl"
    write_corpus_jsonl(q, docs)
    assert load_corpus_jsonl(q) == docs


@pytest.mark.parametrize("line,lineno", [("{bad json", 2), ('{"doc_id": "x", "text": "a"}', 2),
                                         ('{"doc_id": 3}', 2), ('{"doc_id": 3, "tokens": [99999]}', 2)])
def test_corpus_jsonl_errors_carry_line_numbers(tmp_path, line, lineno):
    p = tmp_path / "c.jsonl"
    p.write_text('{"doc_id": 0, "text": "ok"}\n' + line + "\n")
    with pytest.raises(CorpusFormatError) as e:
        load_corpus_jsonl(p)
    assert e.value.lineno == lineno


def test_empty_corpus_file(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text("")
    with pytest.raises(CorpusFormatError):
        load_corpus_jsonl(p)


def test_naive_count_helper_counts_overlaps():
    assert naive_count([Document(0, (1, 1, 1, 1))], [1, 1]) == 3
