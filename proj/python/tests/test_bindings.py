# Copyright 2026 The nadkit Authors
# SPDX-License-Identifier: Apache-2.0

import json

import pytest

RESNET = ("##cell##\n0:input\n1:Conv2d(dim,3)\n2:BN\n3:ReLU\n4:Conv2d(dim,3)\n5:BN\n6:Add\n7:ReLU\n8:output\n"
          "0->1\n1->2\n2->3\n3->4\n4->5\n5->6\n0->6\n6->7\n7->8")


def test_parse_print_round_trip(nk):
    b = nk.Block(RESNET)
    assert len(b) == 9 and b.name == "cell"
    assert nk.Block(str(b)) == b
    assert str(nk.Block("##c##\n0:input\n1:Conv2d(C,3)\n2:output\n0->1\n1->2")).splitlines()[2] == \
        "1:Conv2d(out_channels=C,kernel_size=3)"


def test_parse_error_carries_line(nk):
    with pytest.raises(nk.ParseError, match="line 3"):
        nk.Block("##b##\n0:input\n0:output")
    assert issubclass(nk.ParseError, nk.NadkitError)


def test_validate_feedback(nk, data_dir):
    roi = nk.Block((data_dir / "validator" / "undefined_roialign.block").read_text())
    r = nk.validate(roi, "cell")
    assert not r["ok"]
    assert r["context"] == "node 8 error: Undefined computation ROIAlign is used"
    assert json.loads(r["feedback"]) == {"status": "error", "context": r["context"]}
    assert nk.validate(nk.Block(RESNET))["feedback"] == '{"status":"success"}'
    with pytest.raises(nk.NadkitError):
        nk.validate(roi, "head")


def test_infer_shapes(nk):
    r = nk.infer_shapes(nk.Block(RESNET), B=2, C=16, dim=16, H=32, W=32)
    assert r["ok"] and r["shapes"][8] == [2, 16, 32, 32]


def test_isomorphism_and_hash(nk):
    a = nk.Block("##a##\n0:input\n1:ReLU\n2:GELU\n3:Add\n4:output\n0->1\n0->2\n1->3\n2->3\n3->4")
    b = nk.Block("##b##\n10:input\n7:GELU\n3:ReLU\n5:Add\n1:output\n10->7\n10->3\n3->5\n7->5\n5->1")
    c = nk.Block("##c##\n0:input\n1:ReLU\n2:ReLU\n3:Add\n4:output\n0->1\n0->2\n1->3\n2->3\n3->4")
    assert nk.is_isomorphic(a, b)
    assert nk.canonical_hash(a) == nk.canonical_hash(b)
    assert not nk.is_isomorphic(a, c)
    assert nk.canonical_hash(a) != nk.canonical_hash(c)
    assert len(nk.canonical_hash(a)) == 64


def test_counts_and_width(nk, arch):
    cell, stem, down = arch
    assert nk.count_block(cell, B=1, C=16, dim=16, H=32, W=32)[0] == 4672
    assert nk.search_width(cell, stem, down) == 27
    net = nk.assemble(cell, stem, down, 16)
    assert nk.count_network(net) == (510426, 18395776)
    assert json.loads(net)["resources"] == {"params": 510426, "macs": 18395776}
    with pytest.raises(nk.NadkitError):
        nk.search_width(cell, stem, down, {"max_params": 0, "max_flops": 0})


def test_emit(nk, arch):
    net = nk.assemble(*arch, 8, {"cells_per_stack": 1})
    assert set(nk.backends()) >= {"json", "pytorch"}
    assert list(nk.emit(net, "json")) == ["network.json"]
    assert "def forward" in next(iter(nk.emit(net, "pytorch").values()))
    with pytest.raises(nk.NadkitError):
        nk.emit(net, "tensorflow")


def test_cost_and_metrics(nk):
    assert nk.account_cost(5_371_000, 987_000) == pytest.approx(23.2975)
    rows = [{"executable": True, "correct": True, "input_tokens": 10_000},
            {"executable": True, "correct": False, "input_tokens": 8_000},
            {"executable": False, "input_tokens": 6_000}]
    m = nk.compute_metrics(rows)
    assert (m["total"], m["executable"], m["correct"]) == (3, 2, 1)
    assert m["E"] == pytest.approx(2 / 3) and m["Q"] == pytest.approx(0.5) and m["SR"] == pytest.approx(1 / 3)
    assert m["tokens_mean_k"] == pytest.approx(8.0)


def test_design_replay(nk, data_dir, tmp_path):
    out = nk.design(data_dir / "design" / "config.json", tmp_path / "run")
    assert out["nodes"] == 4 and out["trained"] == 3
    assert (tmp_path / "run" / "tree.json").exists()
    with pytest.raises(nk.NadkitError):
        nk.design(data_dir / "design" / "config.json", tmp_path / "run")
