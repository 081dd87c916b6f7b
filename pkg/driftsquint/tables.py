import petl as etl

from driftsquint.util import number

BOUND_HEADER = ["I1", "I2", "Kset", "R", "V", "bound_name", "bound", "slack"]


def to_csv(obj, kind, path):
    mapper = types[kind]
    table = mapper(obj)
    etl.tocsv(table, path, encoding="utf8", lineterminator="\n")
    return table


def from_csv(path):
    return etl.fromcsv(path, encoding="utf8").convertall(number)


def run_header(experts):
    header = ["t"]
    for prefix in ("l", "w", "r"):
        header += ["%s_%d" % (prefix, k + 1) for k in range(experts)]
    return header + ["ghat"]


def to_run_row(t, losses, weights, regrets, ghat):
    row = [t]
    row += [float(x) for x in losses]
    row += [float(x) for x in weights]
    row += [float(x) for x in regrets]
    row.append(None if ghat is None else float(ghat))
    return row


def to_run_table(record):
    rows = (
        to_run_row(t + 1, record.losses[t], record.weights[t], record.regrets[t], record.ghat[t])
        for t in range(record.horizon)
    )
    return etl.wrap([run_header(record.experts)] + list(rows))


def to_bound_table(report):
    table = etl.fromdataframe(report.frame, include_index=False).cut(*BOUND_HEADER)
    return table.convert(["I1", "I2"], int).convert(["R", "V", "bound", "slack"], float)


def to_comparison_table(frame):
    return etl.fromdataframe(frame.reset_index(), include_index=False)


types = {
    "run": to_run_table,
    "bounds": to_bound_table,
    "comparison": to_comparison_table,
}
