import argparse

from lib import __version__


def float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def setting_assignment(text):
    """KEY=VALUE with a slash separated KEY such as fit/restarts."""
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return tuple(part for part in key.strip().split("/") if part), value.strip()


class ArgumentParser:
    """Command line of fkm.py. Options left at None fall back to the settings file."""

    def __init__(self, argv=None):
        self.parser = self.build_parser()
        self.args = self.parser.parse_args(argv)

    @staticmethod
    def add_data_arguments(parser):
        parser.add_argument('-i', '--input', required=True, help="long-format CSV with one row per observation")
        parser.add_argument('--id-col', default="id", help="subject column (default: id)")
        parser.add_argument('--time-col', default="time", help="time column (default: time)")
        parser.add_argument('--value-col', default="value", help="value column (default: value)")
        parser.add_argument('--t-lo', type=float, help="override the lower end of the time domain")
        parser.add_argument('--t-hi', type=float, help="override the upper end of the time domain")

    @staticmethod
    def add_fit_arguments(parser):
        parser.add_argument('-k', '--k', type=int, help="number of clusters")
        parser.add_argument('--basis', choices=["fourier", "bspline"], help="basis kind")
        parser.add_argument('--nbasis', type=int, help="number of basis functions")
        parser.add_argument('--order', type=int, help="B-spline order (4 = cubic)")
        parser.add_argument('--lambda', dest="lambdas", type=float_list,
                            help="smoothing parameter, or one per cluster separated by commas")
        parser.add_argument('--weight', choices=["subj", "obs"], help="per-subject or per-observation weights")
        parser.add_argument('--restarts', type=int, help="random initial assignments")
        parser.add_argument('--max-iter', type=int, help="iteration cap per restart")
        parser.add_argument('--seed', type=int, help="unsigned 64-bit seed")

    def build_parser(self):
        parser = argparse.ArgumentParser(prog="fkm.py",
                                         description="Functional k-means clustering of sparse longitudinal data")
        parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
        parser.add_argument('--settings', help="settings XML (default: config/settings.xml)")
        parser.add_argument('--log-level', help="DEBUG | INFO | WARNING | ERROR")
        parser.add_argument('--workers', type=int, help="worker threads (default: FKM_WORKERS or physical cores)")
        sub = parser.add_subparsers(dest="command", required=True, metavar="command")

        p = sub.add_parser('fit', help="cluster a dataset")
        self.add_data_arguments(p)
        self.add_fit_arguments(p)
        p.add_argument('--truth-column', help="column with known groups to score the clustering against")
        p.add_argument('--centers-grid', type=int, help="also write the centers on this many equispaced times")
        p.add_argument('-o', '--out-dir', required=True, help="directory for fit_result.json and labels.csv")

        p = sub.add_parser('predict', help="label subjects with a fitted model")
        p.add_argument('--model', required=True, help="fit_result.json of a previous fit")
        self.add_data_arguments(p)
        p.add_argument('-o', '--out', required=True, help="labels CSV to write")

        p = sub.add_parser('simulate', help="generate a synthetic two-cluster dataset")
        p.add_argument('--n', type=int, required=True, help="subjects (even)")
        p.add_argument('--ntp', type=float, required=True, help="expected measurements per subject")
        p.add_argument('--sigma', type=float, required=True, help="noise standard deviation")
        p.add_argument('--seed', type=int, help="unsigned 64-bit seed")
        p.add_argument('--random-effect', choices=["subject", "term"],
                       help="one exponential random effect per subject or one per sine term")
        p.add_argument('-o', '--out', required=True, help="dataset CSV; labels go to <stem>_labels.csv")

        p = sub.add_parser('evaluate', help="agreement of two labelings")
        p.add_argument('--true', required=True, help="reference labels CSV (id,cluster)")
        p.add_argument('--pred', required=True, help="predicted labels CSV (id,cluster)")
        p.add_argument('-o', '--out', help="also write the scores to this JSON file")

        p = sub.add_parser('center-distance', help="Hausdorff distance between two center sets")
        p.add_argument('--a', required=True, help="fit result JSON, centers JSON or grid CSV")
        p.add_argument('--b', required=True, help="fit result JSON, centers JSON or grid CSV")
        p.add_argument('--grid', type=int, help="quadrature points")
        p.add_argument('-o', '--out', help="also write the distance to this JSON file")

        p = sub.add_parser('select-lambda', help="choose the smoothing parameter by clustering stability")
        self.add_data_arguments(p)
        self.add_fit_arguments(p)
        p.add_argument('--candidates', type=float_list, help="comma separated candidate values")
        p.add_argument('--replicates', type=int, help="random half splits per candidate")
        p.add_argument('--selection-restarts', type=int, help="restarts of every fit inside the selection")
        p.add_argument('-o', '--out-dir', required=True, help="directory for selection.json and selection.csv")

        p = sub.add_parser('population-centers', help="dense-data optimal centers of the simulation design")
        p.add_argument('--nlarge', type=int, help="noise-free dense subjects")
        p.add_argument('--grid', type=int, help="equispaced measurement points")
        p.add_argument('--seed', type=int, help="unsigned 64-bit seed")
        p.add_argument('--random-effect', choices=["subject", "term"],
                       help="one exponential random effect per subject or one per sine term")
        p.add_argument('-o', '--out', required=True, help="grid CSV (t,f1,f2); a JSON copy goes next to it")

        p = sub.add_parser('benchmark', help="repeated simulate-fit-score runs over design cells")
        p.add_argument('--n', type=int_list, required=True, help="sample sizes, comma separated")
        p.add_argument('--ntp', type=float_list, required=True, help="expected measurements, comma separated")
        p.add_argument('--sigma', type=float_list, required=True, help="noise levels, comma separated")
        p.add_argument('--basis', choices=["fourier", "bspline"], help="basis kind")
        p.add_argument('--nbasis', type=int, help="number of basis functions")
        p.add_argument('--lambda', dest="lambdas", type=float_list, help="smoothing parameter")
        p.add_argument('--restarts', type=int, help="random initial assignments per fit")
        p.add_argument('--reps', type=int, default=100, help="replications per cell (default: 100)")
        p.add_argument('--seed', type=int, help="unsigned 64-bit seed")
        p.add_argument('--random-effect', choices=["subject", "term"],
                       help="one exponential random effect per subject or one per sine term")
        p.add_argument('--consistency', action='store_true',
                       help="also report the Hausdorff distance to the population centers")
        p.add_argument('--centers-out', action='store_true',
                       help="write every replicate's centers on the population grid")
        p.add_argument('-o', '--out-dir', required=True, help="directory for the benchmark tables")

        p = sub.add_parser('timing', help="single-start fit time against sample size")
        p.add_argument('--n-list', type=int_list, required=True, help="sample sizes, comma separated")
        p.add_argument('--ntp', type=float, default=5.0, help="expected measurements (default: 5)")
        p.add_argument('--sigma', type=float, default=1.0, help="noise level (default: 1)")
        p.add_argument('--samples', type=int, default=10, help="datasets per sample size (default: 10)")
        p.add_argument('--basis', choices=["fourier", "bspline"], help="basis kind")
        p.add_argument('--nbasis', type=int, help="number of basis functions")
        p.add_argument('--seed', type=int, help="unsigned 64-bit seed")
        p.add_argument('--random-effect', choices=["subject", "term"],
                       help="one exponential random effect per subject or one per sine term")
        p.add_argument('-o', '--out-dir', required=True, help="directory for timing.csv and timing.json")

        p = sub.add_parser('settings', help="show, change or reset the settings file")
        p.add_argument('--set', dest="assignments", action='append', type=setting_assignment, metavar="KEY=VALUE",
                       help="change one setting, e.g. fit/restarts=50 (repeatable)")
        p.add_argument('--reset', action='store_true', help="restore the defaults first")

        return parser
