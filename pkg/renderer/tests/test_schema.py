import pytest

from conftest import complexity_csv, convergence_csv, write_lines
from figrender.schema import SchemaError, load_rows


def test_valid_convergence_file_loads_typed_rows(tmp_path):
    path = convergence_csv(tmp_path / "c.csv", n_iters=2, n_tasks=2)
    rows = load_rows("convergence", path)
    assert len(rows) == 6
    first = rows[0]
    assert first["iter"] == 0 and isinstance(first["iter"], int)
    assert first["mode"] == "coreset"
    assert isinstance(first["gap"], float)
    assert first["all_stable"] == 1


def test_trailing_running_average_column_is_accepted(tmp_path):
    path = convergence_csv(tmp_path / "c.csv", ergodic=True)
    rows = load_rows("convergence", path)
    assert "ergodic_avg" in rows[0]
    assert rows[-1]["ergodic_avg"] == pytest.approx(0.25)


def test_renamed_column_is_refused_by_name(tmp_path):
    path = convergence_csv(tmp_path / "c.csv")
    text = path.read_text().replace("gap", "cost", 1)
    bad = write_lines(tmp_path / "bad.csv", text.splitlines())
    with pytest.raises(SchemaError, match=r"column 4 should be 'gap', found 'cost'"):
        load_rows("convergence", bad)


def test_missing_column_is_refused_by_name(tmp_path):
    write_lines(tmp_path / "bad.csv",
                ["epsilon,mode,total_queries", "0.5,coreset,100"])
    with pytest.raises(SchemaError, match=r"missing column 4 \('censored'\)"):
        load_rows("sample_complexity", tmp_path / "bad.csv")


def test_extra_column_is_refused_by_name(tmp_path):
    write_lines(tmp_path / "bad.csv",
                ["epsilon,mode,total_queries,censored,note",
                 "0.5,coreset,100,0,hi"])
    with pytest.raises(SchemaError, match=r"unexpected column 5 \('note'\)"):
        load_rows("sample_complexity", tmp_path / "bad.csv")


def test_swapped_columns_name_the_first_offender(tmp_path):
    write_lines(tmp_path / "bad.csv",
                ["mode,epsilon,total_queries,censored", "coreset,0.5,100,0"])
    with pytest.raises(SchemaError, match="column 1 should be 'epsilon'"):
        load_rows("sample_complexity", tmp_path / "bad.csv")


def test_unparsable_cell_reports_file_and_line(tmp_path):
    write_lines(tmp_path / "bad.csv",
                ["epsilon,mode,total_queries,censored",
                 "0.5,coreset,100,0", "oops,coreset,200,0"])
    with pytest.raises(SchemaError, match=r"bad\.csv:3.*'oops' as epsilon"):
        load_rows("sample_complexity", tmp_path / "bad.csv")


def test_ragged_row_is_refused(tmp_path):
    write_lines(tmp_path / "bad.csv",
                ["epsilon,mode,total_queries,censored", "0.5,coreset,100"])
    with pytest.raises(SchemaError, match="expected 4 cells, found 3"):
        load_rows("sample_complexity", tmp_path / "bad.csv")


def test_empty_and_headeronly_files_are_refused(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(SchemaError, match="empty file"):
        load_rows("convergence", empty)
    headeronly = write_lines(tmp_path / "h.csv",
                             ["epsilon,mode,total_queries,censored"])
    with pytest.raises(SchemaError, match="no data rows"):
        load_rows("sample_complexity", headeronly)


def test_unknown_kind_and_missing_file_are_refused(tmp_path):
    path = complexity_csv(tmp_path / "sc.csv")
    with pytest.raises(SchemaError, match="unknown figure kind 'pie'"):
        load_rows("pie", path)
    with pytest.raises(SchemaError, match="no such file"):
        load_rows("sample_complexity", tmp_path / "absent.csv")
