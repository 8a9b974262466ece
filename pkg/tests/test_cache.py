# Standard Library
from pathlib import Path

# Third Party Library
import pytest

# First Party Library
from kisskit.cache import CacheFormatError
from kisskit.cache import block_path
from kisskit.cache import ensure_cache
from kisskit.cache import load_or_generate
from kisskit.cache import read_block
from kisskit.cache import read_tables
from kisskit.cache import table_path
from kisskit.cache import write_block
from kisskit.glrep import Signature
from kisskit.glrep import signatures_up_to
from kisskit.symsys import coefficient_table
from kisskit.zonal import generate_block


class TestCache:
    def setup_class(self):
        self.lam = Signature(2, 0)
        self.block = generate_block(self.lam, 4, max_i=2)

    def test_write_then_read(self, tmp_path: Path):
        path = block_path(tmp_path, 4, self.lam)
        write_block(path, self.block)
        restored = read_block(path)
        assert restored.lam == self.lam
        assert restored.n == 4
        assert restored.max_i == 2
        assert restored.base == self.block.base

    def test_file_names(self, tmp_path: Path):
        assert block_path(tmp_path, 6, Signature(3, 1)).name == "zonal_n6_l3_1.txt"
        assert table_path(tmp_path, Signature(3, 1)).name == "symsys_l3_1.txt"

    @pytest.mark.parametrize(
        "case",
        [
            pytest.param(dict(content=""), id="empty"),
            pytest.param(dict(content="# something else\n"), id="header"),
            pytest.param(
                dict(
                    content="# kisskit-zonal version=1 n=4 lambda=(2,0) max_i=2 entries=1\n"
                    "lambda=(2,0) n=4 garbage\n"
                ),
                id="record",
            ),
            pytest.param(dict(content="# kisskit-zonal version=1 n=4 lambda=(2,0) max_i=2 entries=0\n"), id="missing"),
        ],
    )
    def test_corrupt_files(self, tmp_path: Path, case):
        path = tmp_path / "zonal.txt"
        path.write_text(case["content"])
        with pytest.raises(CacheFormatError):
            read_block(path)

    def test_truncated_file_is_regenerated(self, tmp_path: Path):
        path = block_path(tmp_path, 4, self.lam)
        write_block(path, self.block)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        block, fresh = load_or_generate(tmp_path, 4, self.lam)
        assert fresh
        assert block.base == self.block.base
        assert read_block(path).base == self.block.base

    def test_smaller_request_is_served_from_cache(self, tmp_path: Path):
        write_block(block_path(tmp_path, 4, self.lam), self.block)
        block, fresh = load_or_generate(tmp_path, 4, self.lam, max_i=1)
        assert not fresh
        assert block.max_i == 1

    def test_coefficient_tables_are_written(self, tmp_path: Path):
        load_or_generate(tmp_path, 4, self.lam)
        tables = read_tables(table_path(tmp_path, self.lam), self.lam)
        for k2, table in tables.items():
            assert table.coefficients == coefficient_table(self.lam, k2).coefficients


def test_ensure_cache_is_idempotent(tmp_path: Path):
    signatures = signatures_up_to(2)
    blocks, regenerated = ensure_cache(tmp_path, 4, signatures)
    assert regenerated == len(signatures)
    assert set(blocks) == set(signatures)
    again, regenerated = ensure_cache(tmp_path, 4, signatures)
    assert regenerated == 0
    assert all(again[lam].base == blocks[lam].base for lam in signatures)

    block_path(tmp_path, 4, Signature(1, 1)).write_text("broken\n")
    _, regenerated = ensure_cache(tmp_path, 4, signatures)
    assert regenerated == 1
