"""Batch command-line front end.

Subcommands: gen, train, spectrum, infer, classify, gradcheck, oracle,
verify.  Every run writes a metrics.json ({command, config, metrics,
artifacts}) and a manifest.json (argv, seeds, inputs, outputs, wall clock,
build id) into --out, plus CSV plot data and PNG figures where they apply.
Exit codes: 0 success, 1 validation error or failed checks, 2 numerical
failure (non-finite loss).
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .covariance import Stabilizer, covariances, relevance, stable_inverse
from .datasets import (PairDataset, gen_discrete_joint, gen_gaussian_pair,
                       gen_labeled_blobs, gen_ring_disk, load_pairs_csv,
                       sample_pairs, save_pairs_csv)
from .discrete import (apply_channel, channel_svd, chi2, exact_covariances,
                       fisher_inner, frobenius_distance, save_joint_csv,
                       truncated_joint)
from .gaussian import (GaussianPair, exact_KLA, exact_posterior_moments,
                       exact_relevances, exact_singular_values, monomial_features)
from .inference import X_FROM_Y, Y_FROM_X, coordinate_targets, fit_statistics, infer_batch
from .network import FeatureNetwork, loss_and_feature_grads
from .training import (NonFiniteLossError, TrainConfig, extract_canonical,
                       load_model, save_model, train)
from . import plots

__all__ = ["main"]


class _CliError(Exception):
    """Validation problem; reported on stderr and mapped to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _CliError(message)


def _write_json(path, doc) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, indent=1)
    os.replace(tmp, path)


def _build_id() -> str:
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             cwd=here, capture_output=True, text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return f"v{__version__}"


def _stabilizer(args) -> Stabilizer:
    if getattr(args, "ridge_eps", None) is not None:
        return Stabilizer.ridge(eps=args.ridge_eps)
    return Stabilizer.pseudo(tol=args.pinv_tol)


def _parse_hidden(text: str) -> tuple:
    if not text.strip():
        return ()
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise _CliError(f"bad --hidden value {text!r}; expected e.g. 64,64") from None


def _parse_targets(spec: str, dim: int, prefix: str):
    if spec in (None, "", "moments"):
        return coordinate_targets(dim, prefix, second_moments=True)
    if spec == "coords":
        return coordinate_targets(dim, prefix, second_moments=False)
    known = dict(coordinate_targets(dim, prefix, second_moments=True))
    out = []
    for tok in spec.split(","):
        tok = tok.strip()
        if tok not in known:
            raise _CliError(f"unknown target {tok!r}; known: coords, moments, "
                            f"{', '.join(sorted(known))}")
        out.append((tok, known[tok]))
    return out


def _require(args, *names):
    for n in names:
        if getattr(args, n.replace("-", "_"), None) is None:
            raise _CliError(f"--{n} is required for this command")


def _load_pairs(path):
    if not os.path.exists(path):
        raise _CliError(f"no such file: {path}")
    return load_pairs_csv(path)


# ---------------------------------------------------------------- handlers

def _cmd_gen(args, out_dir):
    kind = args.dataset
    artifacts = []
    if kind == "joint":
        j = gen_discrete_joint(args.nx, args.ny, args.seed, args.concentration)
        path = os.path.join(out_dir, "joint.csv")
        save_joint_csv(j, path)
        artifacts.append("joint.csv")
        x, y = sample_pairs(j, args.n, args.seed)
        ds = PairDataset(x=x, y=y, name="joint_samples",
                         params={"nx": args.nx, "ny": args.ny}, seed=args.seed)
        metrics = {"n": args.n, "n_x": args.nx, "n_y": args.ny,
                   "table_min": float(j.table.min())}
    elif kind == "gaussian":
        ds = gen_gaussian_pair(args.n, args.tau, args.sigma, args.seed)
        metrics = {"n": ds.n, "x_var": float(ds.x.var())}
    elif kind == "ring":
        ds = gen_ring_disk(args.n, args.seed, gap_angle=args.gap_angle,
                           shift_std=args.shift_std)
        metrics = {"n": ds.n}
    elif kind == "blobs":
        ds = gen_labeled_blobs(args.n, classes=args.classes,
                               separation=args.separation, noise=args.noise,
                               label_noise=args.label_noise, seed=args.seed)
        metrics = {"n": ds.n, "classes": args.classes}
    else:
        raise _CliError(f"unknown dataset kind {kind!r}")

    data_path = os.path.join(out_dir, "data.csv")
    save_pairs_csv(ds, data_path)
    artifacts += ["data.csv", "data.csv.meta.json"]
    fig = plots.dataset_scatter(ds.x, os.path.join(out_dir, "data.png"))
    artifacts.append(os.path.basename(fig))
    metrics.update({"d_x": ds.x.shape[1], "d_y": ds.y.shape[1]})
    config = {"dataset": kind, **ds.params, "seed": args.seed}
    print(f"gen: wrote {ds.n} samples to {data_path}")
    return 0, config, metrics, artifacts


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        k0=args.k0, batch_size=args.batch, epochs=args.epochs, seed=args.seed,
        learning_rate=args.lr, hidden=_parse_hidden(args.hidden),
        optimizer="sgd" if args.sgd else "adam", stabilizer=_stabilizer(args),
        identity_g=args.identity_g)


def _cmd_train(args, out_dir):
    _require(args, "data", "k0")
    ds = _load_pairs(args.data)
    test = _load_pairs(args.test_data) if args.test_data else None
    cfg = _train_config(args)
    model = train(ds.pairs, test.pairs if test else None, cfg)

    model_path = args.model or os.path.join(out_dir, "model.json")
    save_model(model_path, model)
    hist_path = os.path.join(out_dir, "loss_history.csv")
    with open(hist_path, "w") as fh:
        fh.write("epoch,train_loss,test_loss\n")
        for i, (tr, te) in enumerate(model.history):
            fh.write(f"{i},{tr:.17g},{'' if te is None else format(te, '.17g')}\n")
    artifacts = [os.path.basename(model_path), "loss_history.csv"]
    if model.history:
        artifacts.append(os.path.basename(
            plots.loss_curves(model.history, os.path.join(out_dir, "loss.png"))))

    final_train = model.history[-1][0] if model.history else None
    final_test = model.history[-1][1] if model.history else None
    metrics = {"epochs_run": len(model.history),
               "final_train_loss": final_train, "final_test_loss": final_test}
    print(f"train: {len(model.history)} epochs, final train loss "
          f"{final_train if final_train is not None else 'n/a'}")
    return 0, cfg.to_dict(), metrics, artifacts


def _cmd_spectrum(args, out_dir):
    _require(args, "model", "data")
    model = load_model(args.model)
    ds = _load_pairs(args.data)
    spec = extract_canonical(model, ds.pairs, k_report=args.k_report)

    csv_path = os.path.join(out_dir, "spectrum.csv")
    with open(csv_path, "w") as fh:
        fh.write("index,singular_value,relevance\n")
        for i, (sv, rel) in enumerate(zip(spec.singular_values, spec.relevances)):
            fh.write(f"{i},{sv:.17g},{rel:.17g}\n")
    fig = plots.spectrum_plot(spec.singular_values,
                              os.path.join(out_dir, "spectrum.png"))
    metrics = {"singular_values": spec.singular_values.tolist(),
               "relevances": spec.relevances.tolist()}
    print("spectrum:", " ".join(f"{s:.4f}" for s in spec.singular_values))
    return 0, model.config.to_dict(), metrics, ["spectrum.csv", os.path.basename(fig)]


def _cmd_infer(args, out_dir):
    _require(args, "model", "data")
    model = load_model(args.model)
    ds = _load_pairs(args.data)
    direction = args.direction
    side = ds.x if direction == X_FROM_Y else ds.y
    targets = _parse_targets(args.targets, side.shape[1],
                             "x" if direction == X_FROM_Y else "y")
    inf = fit_statistics(model, ds.pairs, targets, direction=direction,
                         stabilizer=_stabilizer(args))

    obs_ds = _load_pairs(args.test_data) if args.test_data else ds
    obs = obs_ds.y if direction == X_FROM_Y else obs_ds.x
    values = infer_batch(inf, obs)

    model_path = os.path.join(out_dir, "model.json")
    save_model(model_path, model, inference_doc=inf.to_dict())
    post_path = os.path.join(out_dir, "posterior.csv")
    with open(post_path, "w") as fh:
        fh.write(",".join(inf.target_names) + "\n")
        np.savetxt(fh, values, delimiter=",", fmt="%.17g")
    metrics = {"n_observations": int(values.shape[0]),
               "targets": list(inf.target_names),
               "mean_expectations": values.mean(axis=0).tolist(),
               "first_expectations": values[0].tolist()}
    print(f"infer: {values.shape[0]} observations, targets {list(inf.target_names)}")
    return 0, {"direction": direction, **model.config.to_dict()}, metrics, \
        ["model.json", "posterior.csv"]


def _cmd_classify(args, out_dir):
    _require(args, "model", "data")
    model = load_model(args.model)
    ds = _load_pairs(args.data)
    classes = ds.y.shape[1]
    targets = coordinate_targets(classes, "y")
    inf = fit_statistics(model, ds.pairs, targets, direction=Y_FROM_X,
                         stabilizer=_stabilizer(args))

    test = _load_pairs(args.test_data) if args.test_data else ds
    scores = infer_batch(inf, test.x)
    predicted = np.argmax(scores, axis=1)
    given = np.argmax(test.y, axis=1)
    accuracy = float(np.mean(predicted == given))

    model_path = os.path.join(out_dir, "model.json")
    save_model(model_path, model, inference_doc=inf.to_dict())
    pred_path = os.path.join(out_dir, "predictions.csv")
    with open(pred_path, "w") as fh:
        fh.write("index,predicted,given," +
                 ",".join(f"score_{i}" for i in range(classes)) + "\n")
        for i, (p, g, row) in enumerate(zip(predicted, given, scores)):
            fh.write(f"{i},{p},{g}," + ",".join(f"{s:.17g}" for s in row) + "\n")
    artifacts = ["model.json", "predictions.csv"]
    if test.x.shape[1] >= 2:
        artifacts.append(os.path.basename(plots.classification_plot(
            test.x, given, predicted, os.path.join(out_dir, "classification.png"))))
    metrics = {"accuracy": accuracy, "n_test": int(test.n), "classes": classes}
    print(f"classify: accuracy {accuracy:.4f} on {test.n} samples")
    return 0, model.config.to_dict(), metrics, artifacts


def _gradcheck_trial(rng: np.random.Generator, stab: Stabilizer):
    """Central finite differences vs analytic gradients on one random setup.

    Draws keep the input dimension at or above k0 and redraw when a
    covariance block is close to singular: finite differences only see the
    smooth region of the objective, so a near-degenerate spectrum would
    measure curvature blowup instead of gradient correctness.  Returns
    (end_to_end_max_rel_err, feature_max_rel_err).
    """
    for _ in range(50):
        n = int(rng.integers(30, 60))
        k0 = int(rng.integers(2, 4))
        d_x = int(rng.integers(k0, k0 + 3))
        d_y = int(rng.integers(k0, k0 + 3))
        net_f = FeatureNetwork.create((d_x, 8, k0), rng)
        net_g = FeatureNetwork.create((d_y, 8, k0), rng)
        x = rng.standard_normal((n, d_x))
        y = rng.standard_normal((n, d_y))
        F, G = net_f.forward(x), net_g.forward(y)
        t = covariances(F, G)
        wk = np.linalg.eigvalsh(t.K)
        wl = np.linalg.eigvalsh(t.L)
        if min(wk[0] / wk[-1], wl[0] / wl[-1]) > 1e-3:
            break
    h = 1e-5

    _, dF, dG, _ = loss_and_feature_grads(F, G, k0, stab)

    def batch_loss(Fv, Gv):
        return loss_and_feature_grads(Fv, Gv, k0, stab)[0]

    # feature-level check on a subsample of entries
    feat_err = 0.0
    flat_idx = rng.permutation(F.size)[:20]
    for fi in flat_idx:
        i, j = divmod(int(fi), F.shape[1])
        for M, dM, other, order in ((F, dF, G, "fg"), (G, dG, F, "gf")):
            Mp, Mm = M.copy(), M.copy()
            Mp[i, j] += h
            Mm[i, j] -= h
            if order == "fg":
                num = (batch_loss(Mp, other) - batch_loss(Mm, other)) / (2 * h)
            else:
                num = (batch_loss(other, Mp) - batch_loss(other, Mm)) / (2 * h)
            denom = max(abs(num), abs(dM[i, j]), 1e-8)
            feat_err = max(feat_err, abs(num - dM[i, j]) / denom)

    # end-to-end check through the networks on a parameter subsample
    gf = net_f.backprop(x, dF)
    gg = net_g.backprop(y, dG)
    end_err = 0.0
    for net, grads in ((net_f, gf), (net_g, gg)):
        for li in range(len(net.weights)):
            for arr, garr in ((net.weights[li], grads.weights[li]),
                              (net.biases[li], grads.biases[li])):
                flat = arr.reshape(-1)
                gflat = garr.reshape(-1)
                for pi in rng.permutation(flat.size)[:5]:
                    orig = flat[pi]
                    flat[pi] = orig + h
                    lp = batch_loss(net_f.forward(x), net_g.forward(y))
                    flat[pi] = orig - h
                    lm = batch_loss(net_f.forward(x), net_g.forward(y))
                    flat[pi] = orig
                    num = (lp - lm) / (2 * h)
                    denom = max(abs(num), abs(gflat[pi]), 1e-6)
                    end_err = max(end_err, abs(num - gflat[pi]) / denom)
    return end_err, feat_err


def _cmd_gradcheck(args, out_dir):
    rng = np.random.default_rng(args.seed)
    stab = _stabilizer(args)
    worst_end, worst_feat = 0.0, 0.0
    for t in range(args.trials):
        end_err, feat_err = _gradcheck_trial(rng, stab)
        worst_end = max(worst_end, end_err)
        worst_feat = max(worst_feat, feat_err)
    passed = bool(worst_end < 1e-4 and worst_feat < 1e-5)
    metrics = {"trials": args.trials, "max_rel_err_end_to_end": float(worst_end),
               "max_rel_err_features": float(worst_feat), "passed": passed}
    print(f"gradcheck: {args.trials} trials, end-to-end {worst_end:.3e}, "
          f"features {worst_feat:.3e} -> {'PASS' if passed else 'FAIL'}")
    config = {"trials": args.trials, "seed": args.seed}
    return (0 if passed else 1), config, metrics, []


def _cmd_oracle(args, out_dir):
    if args.family == "gaussian":
        gp = GaussianPair(tau=args.tau, sigma=args.sigma)
        t = exact_KLA(gp, args.k0)
        mean, second = exact_posterior_moments(gp, args.y)
        metrics = {
            "gamma": gp.gamma,
            "K": t.K.tolist(), "L": t.L.tolist(), "A": t.A.tolist(),
            "relevances": exact_relevances(gp, args.k0).tolist(),
            "singular_values": exact_singular_values(gp, args.k0).tolist(),
            "posterior_mean": mean, "posterior_second_moment": second,
        }
        config = {"family": "gaussian", "tau": args.tau, "sigma": args.sigma,
                  "k0": args.k0, "y": args.y}
        print(f"oracle gaussian: gamma {gp.gamma:.6f}, relevances "
              + " ".join(f"{r:.6f}" for r in exact_relevances(gp, args.k0)))
        return 0, config, metrics, []

    j = gen_discrete_joint(args.nx, args.ny, args.seed, args.concentration)
    d = channel_svd(j)
    path = os.path.join(out_dir, "joint.csv")
    save_joint_csv(j, path)
    metrics = {"etas": d.etas.tolist(),
               "relevance_full_basis": float(np.sum(d.etas ** 2)),
               "rank": j.rank}
    config = {"family": "discrete", "nx": args.nx, "ny": args.ny,
              "seed": args.seed, "concentration": args.concentration}
    print("oracle discrete: etas " + " ".join(f"{e:.6f}" for e in d.etas))
    return 0, config, metrics, ["joint.csv"]


# ---------------------------------------------------------------- verify

def _check(name, ok, detail, results):
    results.append({"name": name, "passed": bool(ok), "detail": detail})
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def _verify_gaussian(results, seed):
    gp = GaussianPair(tau=1.0, sigma=1.0)
    stab = Stabilizer.pseudo()
    t = exact_KLA(gp, 3)
    rel = relevance(t, stab)
    want = float(exact_relevances(gp, 3).sum())
    _check("gaussian.relevance_closed_form", abs(rel - want) < 1e-12,
           f"Tr = {rel!r} vs 1 + g + g^2 = {want!r}", results)

    m = stable_inverse(t.K, stab) @ t.A.T @ stable_inverse(t.L, stab) @ t.A
    eig = np.sort(np.linalg.eigvals(m).real)[::-1]
    want_eig = exact_relevances(gp, 3)
    _check("gaussian.spectrum_diagonal", np.allclose(eig, want_eig, atol=1e-12),
           f"eigenvalues {eig.tolist()}", results)

    rng = np.random.default_rng(seed)
    xs = rng.standard_normal(200000)
    ys = xs + rng.standard_normal(200000)
    F = monomial_features(xs, 3)
    G = monomial_features(ys, 3)
    samp = covariances(F, G)
    _check("gaussian.monte_carlo_KLA",
           np.allclose(samp.K, t.K, atol=0.1) and np.allclose(samp.L, t.L, atol=0.2)
           and np.allclose(samp.A, t.A, atol=0.2),
           "sampled K, L, A near closed forms at n = 200000", results)

    w = stable_inverse(t.K, stab) @ t.A.T @ stable_inverse(t.L, stab)
    theta = np.array([t.K[1], t.K[2]])  # E[x f_j], E[x^2 f_j] are K rows
    for y_val in (0.0, 2.0, -1.5):
        g_obs = np.array([1.0, y_val, y_val ** 2])
        got = theta @ w @ g_obs
        mean, second = exact_posterior_moments(gp, y_val)
        ok = abs(got[0] - mean) < 1e-12 and abs(got[1] - second) < 1e-12
        _check(f"gaussian.posterior_y={y_val}", ok,
               f"({got[0]!r}, {got[1]!r}) vs ({mean!r}, {second!r})", results)


def _verify_discrete(results, seed):
    rng = np.random.default_rng(seed)
    stab = Stabilizer.pseudo()
    adj_worst = 0.0
    contract_ok = True
    spec_worst = 0.0
    ey_worst = 0.0
    for trial in range(10):
        j = gen_discrete_joint(int(rng.integers(2, 7)), int(rng.integers(2, 7)),
                               rng.integers(0, 2 ** 31))
        mu = rng.standard_normal(j.n_x)
        nu = rng.standard_normal(j.n_y)
        lhs = fisher_inner(nu, apply_channel(j, mu, "x_to_y"), j.p_y)
        rhs = fisher_inner(apply_channel(j, nu, "y_to_x"), mu, j.p_x)
        adj_worst = max(adj_worst, abs(lhs - rhs))

        q = rng.random(j.n_x) + 0.05
        q = q / q.sum()
        contract_ok &= (chi2(apply_channel(j, q, "x_to_y"), j.p_y)
                        <= chi2(q, j.p_x) + 1e-12)

        d = channel_svd(j)
        t = exact_covariances(j, np.eye(j.n_x), np.eye(j.n_y))
        spec_worst = max(spec_worst,
                         abs(relevance(t, stab) - float(np.sum(d.etas ** 2))))
        for k0 in range(1, d.r + 1):
            got = frobenius_distance(j, truncated_joint(d, k0))
            want = float(np.sum(d.etas[k0:] ** 2))
            ey_worst = max(ey_worst, abs(got - want))
    _check("discrete.adjointness", adj_worst < 1e-10,
           f"max |<nu,N mu> - <N* nu,mu>| = {adj_worst:.3e}", results)
    _check("discrete.contractivity", contract_ok,
           "chi2 never grows through the channel", results)
    _check("discrete.spectrum_recovery", spec_worst < 1e-9,
           f"max |relevance - sum eta^2| = {spec_worst:.3e}", results)
    _check("discrete.eckart_young", ey_worst < 1e-9,
           f"max truncation-distance error = {ey_worst:.3e}", results)


def _cmd_verify(args, out_dir):
    results = []
    if args.suite in ("gaussian", "all"):
        _verify_gaussian(results, args.seed)
    if args.suite in ("discrete", "all"):
        _verify_discrete(results, args.seed)
    if not results:
        raise _CliError(f"unknown suite {args.suite!r}")
    n_fail = sum(1 for r in results if not r["passed"])
    report = {"suite": args.suite, "checks": results, "failures": n_fail}
    _write_json(os.path.join(out_dir, "report.json"), report)
    metrics = {"checks": len(results), "failures": n_fail}
    print(f"verify: {len(results) - n_fail}/{len(results)} checks passed")
    return (0 if n_fail == 0 else 1), {"suite": args.suite, "seed": args.seed}, \
        metrics, ["report.json"]


# ---------------------------------------------------------------- parser

def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pinv-tol", type=float, default=1e-10,
                   help="relative eigenvalue cutoff for pseudo-inverses")
    p.add_argument("--ridge-eps", type=float, default=None,
                   help="use ridge stabilization (M + eps I)^-1 instead")
    p.add_argument("--out", default=".", help="output directory")


def _build_parser() -> _Parser:
    parser = _Parser(prog="relfeat",
                     description="Learn, inspect, and apply the most relevant "
                                 "feature pairs of a joint distribution.")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--dataset", required=True,
                   choices=["gaussian", "ring", "blobs", "joint"])
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--gap-angle", type=float, default=0.0)
    p.add_argument("--shift-std", type=float, default=0.05)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--separation", type=float, default=2.0)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--label-noise", type=float, default=0.0)
    p.add_argument("--nx", type=int, default=4)
    p.add_argument("--ny", type=int, default=4)
    p.add_argument("--concentration", type=float, default=1.0)
    _add_common(p)

    p = sub.add_parser("train", help="fit a feature-network pair")
    p.add_argument("--data", help="training pairs CSV")
    p.add_argument("--test-data", help="held-out pairs CSV for loss monitoring")
    p.add_argument("--model", help="model output path (default OUT/model.json)")
    p.add_argument("--k0", type=int)
    p.add_argument("--batch", type=int, default=512)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--hidden", default="64,64")
    p.add_argument("--sgd", action="store_true", help="plain gradient descent")
    p.add_argument("--identity-g", action="store_true",
                   help="pin y-side features to the raw y values")
    _add_common(p)

    p = sub.add_parser("spectrum", help="extract the learned singular spectrum")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--k-report", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("infer", help="fit target statistics and infer posteriors")
    p.add_argument("--model")
    p.add_argument("--data", help="training pairs CSV for the statistics")
    p.add_argument("--test-data", help="observations CSV (defaults to --data)")
    p.add_argument("--targets", default="moments",
                   help="comma-separated target names, or coords / moments")
    p.add_argument("--direction", choices=[X_FROM_Y, Y_FROM_X], default=X_FROM_Y)
    _add_common(p)

    p = sub.add_parser("classify", help="classify via inferred one-hot labels")
    p.add_argument("--model")
    p.add_argument("--data", help="training pairs CSV (y one-hot)")
    p.add_argument("--test-data", help="evaluation pairs CSV")
    _add_common(p)

    p = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p.add_argument("--trials", type=int, default=20)
    _add_common(p)

    p = sub.add_parser("oracle", help="print exact oracle values")
    p.add_argument("--family", choices=["gaussian", "discrete"], required=True)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--k0", type=int, default=3)
    p.add_argument("--y", type=float, default=2.0)
    p.add_argument("--nx", type=int, default=4)
    p.add_argument("--ny", type=int, default=4)
    p.add_argument("--concentration", type=float, default=1.0)
    _add_common(p)

    p = sub.add_parser("verify", help="run the exact verification suites")
    p.add_argument("--suite", choices=["gaussian", "discrete", "all"], default="all")
    _add_common(p)

    return parser


_HANDLERS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "spectrum": _cmd_spectrum,
    "infer": _cmd_infer,
    "classify": _cmd_classify,
    "gradcheck": _cmd_gradcheck,
    "oracle": _cmd_oracle,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        out_dir = args.out
        os.makedirs(out_dir, exist_ok=True)
        started = datetime.now(timezone.utc).isoformat()
        t0 = time.monotonic()
        status, config, metrics, artifacts = _HANDLERS[args.command](args, out_dir)

        _write_json(os.path.join(out_dir, "metrics.json"),
                    {"command": args.command, "config": config,
                     "metrics": metrics, "artifacts": artifacts})
        manifest = {
            "command": args.command,
            "argv": list(sys.argv if argv is None else argv),
            "config": config,
            "seeds": {"seed": getattr(args, "seed", None)},
            "inputs": [p for p in (getattr(args, "data", None),
                                   getattr(args, "test_data", None),
                                   getattr(args, "model", None)) if p],
            "outputs": artifacts + ["metrics.json"],
            "wall_clock_s": time.monotonic() - t0,
            "build": _build_id(),
            "started": started,
        }
        _write_json(os.path.join(out_dir, "manifest.json"), manifest)
        return status
    except _CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except NonFiniteLossError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
