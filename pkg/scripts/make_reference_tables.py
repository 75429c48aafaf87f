"""Regenerate ``src/syncon/data/table1.ref`` and ``tableA1.ref``.

Cell values are the published Monte Carlo tables. Tolerances are four
Monte Carlo standard errors of the difference between two independent runs
of ``n`` replications each (the reference's own count):

* means:  4 * sd * sqrt(2 / n)
* sds:    4 * sd * sqrt((kurtosis - 1) / (2 n)), kurtosis 3 for loadings and
          6 for effect estimates, whose OLS distributions are heavy-tailed.
"""
import math
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "syncon" / "data"

# statistic -> {panel: [values for each J]} per estimator
TABLE1_J = (4, 10, 50, 100)
TABLE1 = {
    "sc": {
        "A": {"mean_mu1": (0.760, 0.817, 0.905, 0.929), "sd_mu1": (0.206, 0.156, 0.076, 0.054),
              "mean_mu2": (0.240, 0.183, 0.095, 0.071), "sd_mu2": (0.206, 0.156, 0.076, 0.054),
              "sd_alpha": (1.288, 1.194, 1.084, 1.073)},
        "B": {"mean_mu1": (0.753, 0.831, 0.922, 0.944), "sd_mu1": (0.217, 0.136, 0.057, 0.040),
              "mean_mu2": (0.247, 0.169, 0.078, 0.056), "sd_mu2": (0.217, 0.136, 0.057, 0.040),
              "sd_alpha": (1.297, 1.186, 1.050, 1.047)},
    },
    "ols": {
        "A": {"mean_mu1": (0.653, 0.816, 0.962, 0.976), "sd_mu1": (0.489, 0.516, 0.501, 0.506),
              "mean_mu2": (-0.002, -0.002, -0.005, 0.010), "sd_mu2": (0.498, 0.509, 0.497, 0.518),
              "sd_alpha": (1.586, 1.984, 3.791, 5.220)},
        "B": {"mean_mu1": (0.637, 0.828, 0.960, 0.982), "sd_mu1": (0.569, 0.343, 0.143, 0.103),
              "mean_mu2": (0.001, 0.003, 0.000, 0.001), "sd_mu2": (0.582, 0.335, 0.143, 0.102),
              "sd_alpha": (1.798, 1.586, 1.420, 1.444)},
    },
    "ols_addup": {
        "A": {"mean_mu1": (0.829, 0.910, 0.982, 0.989), "sd_mu1": (0.319, 0.324, 0.320, 0.325),
              "mean_mu2": (0.171, 0.090, 0.018, 0.011), "sd_mu2": (0.319, 0.324, 0.320, 0.325),
              "sd_alpha": (1.486, 1.806, 3.437, 4.661)},
        "B": {"mean_mu1": (0.825, 0.915, 0.981, 0.991), "sd_mu1": (0.354, 0.231, 0.100, 0.072),
              "mean_mu2": (0.175, 0.085, 0.019, 0.009), "sd_mu2": (0.354, 0.231, 0.100, 0.072),
              "sd_alpha": (1.571, 1.519, 1.411, 1.437)},
    },
}

TABLEA1_J = (4, 12, 40, 100)
TABLEA1 = {
    "sc": {
        "A": {"mean_mu1": (0.732, 0.814, 0.885, 0.925), "sd_mu1": (0.222, 0.151, 0.089, 0.058),
              "mean_z1": (0.733, 0.820, 0.880, 0.921), "sd_z1": (0.200, 0.148, 0.090, 0.055),
              "sd_alpha": (1.408, 1.275, 1.132, 1.063)},
        "B": {"mean_mu1": (0.728, 0.832, 0.902, 0.938), "sd_mu1": (0.219, 0.126, 0.069, 0.039),
              "mean_z1": (0.738, 0.827, 0.908, 0.938), "sd_z1": (0.230, 0.128, 0.066, 0.042),
              "sd_alpha": (1.406, 1.186, 1.098, 1.058)},
    },
    "sc_nested_halflags": {
        "A": {"mean_mu1": (0.731, 0.811, 0.889, 0.927), "sd_mu1": (0.241, 0.164, 0.094, 0.063),
              "mean_z1": (0.770, 0.840, 0.890, 0.925), "sd_z1": (0.202, 0.147, 0.091, 0.060),
              "sd_alpha": (1.430, 1.277, 1.142, 1.070)},
        "B": {"mean_mu1": (0.726, 0.836, 0.905, 0.942), "sd_mu1": (0.230, 0.131, 0.073, 0.042),
              "mean_z1": (0.772, 0.840, 0.912, 0.941), "sd_z1": (0.229, 0.129, 0.067, 0.043),
              "sd_alpha": (1.407, 1.203, 1.104, 1.069)},
    },
    "sc_nested_mean": {
        "A": {"mean_mu1": (0.675, 0.686, 0.659, 0.673), "sd_mu1": (0.340, 0.262, 0.228, 0.197),
              "mean_z1": (0.858, 0.956, 0.989, 0.992), "sd_z1": (0.188, 0.122, 0.048, 0.038),
              "sd_alpha": (1.496, 1.353, 1.222, 1.184)},
        "B": {"mean_mu1": (0.688, 0.692, 0.674, 0.666), "sd_mu1": (0.342, 0.264, 0.231, 0.192),
              "mean_z1": (0.865, 0.962, 0.986, 0.995), "sd_z1": (0.204, 0.099, 0.055, 0.024),
              "sd_alpha": (1.566, 1.294, 1.225, 1.223)},
    },
}


def tolerance(stat, value, sd_of_cell, n):
    if stat.startswith("mean_"):
        return 4.0 * sd_of_cell * math.sqrt(2.0 / n)
    kurt = 6.0 if stat == "sd_alpha" else 3.0
    return 4.0 * value * math.sqrt((kurt - 1.0) / (2.0 * n))


def render(table, js, n, title):
    lines = [f"# {title}", f"# tolerances: 4 MC standard errors at {n} replications per run",
             "panel,estimator,J,statistic,value,tolerance"]
    for est, panels in table.items():
        for panel, stats in panels.items():
            for i, J in enumerate(js):
                for stat, values in stats.items():
                    sd_key = "sd_" + stat[len("mean_"):] if stat.startswith("mean_") else stat
                    tol = tolerance(stat, values[i], stats[sd_key][i], n)
                    lines.append(f"{panel},{est},{J},{stat},{values[i]!r},{round(tol, 4)!r}")
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    (DATA / "table1.ref").write_text(render(TABLE1, TABLE1_J, 5000, "Two-factor design, 5000 replications"))
    (DATA / "tableA1.ref").write_text(render(TABLEA1, TABLEA1_J, 500, "Two-factor design with covariates, 500 replications"))
