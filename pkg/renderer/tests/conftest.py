"""CSV factories that emit the documented artifact layouts.

Kept independent of the producing package on purpose: the renderer's whole
contract is these files, so the tests write them from scratch.
"""


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return path


def convergence_csv(path, mode="coreset", n_iters=4, n_tasks=2, scale=1.0,
                    ergodic=False):
    """A plausible single-mode training log with decaying gaps."""
    header = "iter,mode,task_id,gap,grad_norm_sq,cum_queries,all_stable"
    lines = [header + (",ergodic_avg" if ergodic else "")]
    for n in range(n_iters + 1):
        for task in range(n_tasks):
            gap = scale / (n + 1.0) + 0.01 * task
            grad = "nan" if n == 0 else repr(0.5 / n)
            row = f"{n},{mode},{task},{gap!r},{grad},{100 * (n + 1)},1"
            if ergodic:
                row += ",nan" if n == 0 else f",{1.0 / n!r}"
            lines.append(row)
    return write_lines(path, lines)


def complexity_csv(path, censor_last=False, scale=1.0):
    """Thresholds in descending-epsilon order for two training variants."""
    lines = ["epsilon,mode,total_queries,censored"]
    for mode, factor in (("coreset", 1), ("full_pool", 3)):
        for rank, eps in enumerate((0.5, 0.2, 0.1)):
            censored = int(censor_last and mode == "full_pool" and rank == 2)
            queries = 40_000 if censored else factor * 1000 * (rank + 1)
            lines.append(f"{eps * scale!r},{mode},{queries},{censored}")
    return write_lines(path, lines)


def estimator_csv(path, function="lqr", jitter=0.0):
    lines = ["function,n_s,r,median_abs_err,exact_grad_norm"]
    for n_s in (100, 1000, 10000):
        for r in (0.1, 0.01):
            err = (1.0 + jitter) / (n_s ** 0.5) + r * r
            lines.append(f"{function},{n_s},{r!r},{err!r},{2.5!r}")
    return write_lines(path, lines)


def adaptation_csv(path, n_steps=3, n_tasks=2, scale=1.0):
    lines = ["k,controller,task_id,gap"]
    for name, start in (("random", 8.0), ("trained", 0.05)):
        for k in range(n_steps + 1):
            for task in range(n_tasks):
                gap = scale * start / (k + 1.0) + 0.001 * task
                lines.append(f"{k},{name},{task},{gap!r}")
    return write_lines(path, lines)
