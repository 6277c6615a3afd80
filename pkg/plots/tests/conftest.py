import pytest


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def triple_csv(tmp_path):
    path = tmp_path / "triple-scaling.csv"
    # zeta ~ n^3/2 with a mild 1/n correction, like the real solver output
    rows = []
    for n in (100, 1000, 10000, 100000):
        zeta = n**3 / 2.0 * (1.0 + 1.0 / n)
        rows.append(f"{n},{zeta!r},{n**3 / 2.0!r}")
    write_lines(
        path,
        [
            "# schema=1",
            "# tool=kcip-lab/0.1.0",
            "# kind=triple-scaling",
            "# config_hash=abcdef123456",
            "# seed=0",
            "# c=1.0",
            "# m=2",
            "n,zeta_exact,asymptote",
            *rows,
        ],
    )
    return path


@pytest.fixture
def drift_csv(tmp_path):
    path = tmp_path / "drift-curve.csv"
    rows = [f"{t},{25.0 * 0.9 ** i + 1.0!r},{0.3!r}" for i, t in enumerate(range(0, 5000, 500))]
    write_lines(
        path,
        [
            "# schema=1",
            "# kind=drift-curve",
            "# config_hash=feedbead0001",
            "# seed=3",
            "# graph=torus:L=5,d=2",
            "# c=1.0",
            "t,mean_v,stderr",
            *rows,
        ],
    )
    return path


@pytest.fixture
def occupation_csv(tmp_path):
    path = tmp_path / "occupation.csv"
    rows = []
    for rep in range(3):
        rows += [
            f"{rep},1,700,0.7",
            f"{rep},2,200,0.2",
            f"{rep},residual,100,0.1",
        ]
    write_lines(
        path,
        [
            "# schema=1",
            "# kind=occupation",
            "# config_hash=0011aabbccdd",
            "# seed=5",
            "replicate,class,kappa,fraction",
            *rows,
        ],
    )
    return path


@pytest.fixture
def tv_csv(tmp_path):
    path = tmp_path / "mixing-scan.csv"
    rows = [f"{t},{0.9 * 0.8 ** t!r}" for t in range(30)]
    write_lines(
        path,
        [
            "# schema=1",
            "# kind=mixing-scan",
            "# config_hash=9876543210ab",
            "# seed=1",
            "# graph=torus:L=5,d=1",
            "t,d_t",
            *rows,
        ],
    )
    return path
