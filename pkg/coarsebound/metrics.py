from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

registry = CollectorRegistry()

solve_total = Counter("coarsebound_solves_total", "Divergence problems solved", ["outcome"], registry=registry)
solve_duration = Histogram(
    "coarsebound_solve_duration_seconds", "Max-flow solve time per problem",
    buckets=[0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 30.0], registry=registry,
)
ball_points = Gauge("coarsebound_ball_points", "Points in the most recent ball built", ["space"], registry=registry)
sweep_cells = Counter("coarsebound_sweep_cells_total", "Sweep cells finished", ["status"], registry=registry)


def record_solve(outcome: str, seconds: float) -> None:
    solve_total.labels(outcome=outcome).inc()
    solve_duration.observe(seconds)


def record_ball(space: str, size: int) -> None:
    ball_points.labels(space=space).set(size)


def record_sweep_cell(status: str) -> None:
    sweep_cells.labels(status=status).inc()


def write_metrics(path: str) -> None:
    """Dump the registry in the text exposition format."""
    write_to_textfile(path, registry)
