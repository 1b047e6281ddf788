"""Command-line interface.

Subcommands: ``phantom gen``, ``train voi|naf|rf``, ``segment``,
``jei-script``, ``evaluate``, ``experiment run``, ``serve``.
Global flags: ``--seed``, ``--config <path>``, ``--data-root <dir>``.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harness
from .config import apply_overrides, read_config
from .costs import gradient_bone_cost
from .graph import ColumnGraph, GraphParams
from .learn import (detect_voi, extract_features, extract_patch_samples,
                    load_naf_model, load_rf_model, naf_probability_map,
                    sample_patch_centers, save_naf_model, save_rf_model,
                    save_voi_model, train_clustered_rf, train_naf, train_voi,
                    training_windows, truth_voi)
from .mesh import read_obj, write_obj
from .volume import (LABEL_CARTILAGE_A, LABEL_CARTILAGE_B, Phantom,
                     PhantomSpec, make_phantom, read_volume, write_volume)


def _phantom_dir(data_root: str, name: str) -> str:
    return os.path.join(data_root, "phantoms", name)


def write_phantom(ph: Phantom, spec: PhantomSpec, path: str) -> None:
    os.makedirs(path, exist_ok=True)
    vol = ph.volume
    write_volume(
        vol.__class__(data=vol.data.astype(np.float32), spacing=vol.spacing,
                      origin=vol.origin), os.path.join(path, "volume.mhd"))
    write_volume(ph.labels, os.path.join(path, "labels.mhd"))
    spec.to_file(os.path.join(path, "spec.cfg"))
    for obj, surf, mesh in ph.truth_surfaces:
        write_obj(mesh, os.path.join(path, f"truth_o{obj}_s{surf}.obj"))


def read_phantom(path: str) -> Phantom:
    spec = PhantomSpec.from_file(os.path.join(path, "spec.cfg"))
    vol = read_volume(os.path.join(path, "volume.mhd"))
    labels = read_volume(os.path.join(path, "labels.mhd"))
    truth = []
    for obj in (0, 1):
        for surf in (0, 1):
            truth.append((obj, surf, read_obj(
                os.path.join(path, f"truth_o{obj}_s{surf}.obj"))))
    return Phantom(volume=vol, truth_surfaces=truth, labels=labels, spec=spec)


def _graph_params(overrides: dict) -> GraphParams:
    return apply_overrides(GraphParams(), overrides, "graph")


def cmd_phantom_gen(args, overrides) -> int:
    spec = apply_overrides(PhantomSpec(seed=args.seed), overrides, "phantom")
    if args.noise is not None:
        spec.noise_sigma = args.noise
    if args.lesions is not None:
        spec.lesion_count = args.lesions
    name = args.name or f"seed{spec.seed:05d}"
    out = _phantom_dir(args.data_root, name)
    write_phantom(make_phantom(spec), spec, out)
    print(out)
    return 0


def _load_corpus(data_root: str, names: list[str]) -> list[Phantom]:
    return [read_phantom(_phantom_dir(data_root, n)) for n in names]


def cmd_train(args, overrides) -> int:
    phantoms = _load_corpus(args.data_root, args.phantoms)
    rng = np.random.default_rng(args.seed)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    if args.stage == "voi":
        examples = []
        for ph in phantoms:
            voi = truth_voi(dict(((o, s), m) for o, s, m
                                 in ph.truth_surfaces)[(0, 0)])
            examples.append(training_windows(ph.volume, voi))
        save_voi_model(train_voi(examples), args.out)
    elif args.stage == "naf":
        samples = []
        shape = (args.patch,) * 3
        per = max(args.patches // max(len(phantoms), 1), 50)
        for ph in phantoms:
            cart = np.isin(ph.labels.data,
                           (LABEL_CARTILAGE_A, LABEL_CARTILAGE_B))
            centers = sample_patch_centers(
                cart, per // 2, per // 2, shape,
                np.random.default_rng(rng.integers(2**31)))
            samples.extend(extract_patch_samples(ph.volume, cart, centers,
                                                 shape))
        save_naf_model(train_naf(samples, trees=args.trees,
                                 patches_per_tree=args.patches,
                                 seed=args.seed), args.out)
    else:  # rf
        params = _graph_params(overrides)
        naf_model = load_naf_model(args.naf_model) if args.naf_model else None
        cfg = harness.ExperimentConfig(seed=args.seed)
        init_meshes = harness.corpus_mean_shapes(phantoms, cfg)
        training = []
        for ph in phantoms:
            g = harness.build_phantom_graph(ph, params,
                                            init_meshes=init_meshes)
            truth_pos = harness.truth_position_table(
                g, harness.phantom_truth_meshes(ph))
            labels = harness._node_labels(g, truth_pos)
            maps = harness._naf_maps(ph, naf_model) if naf_model else None
            mode = harness.MODE_NAF_RF if naf_model else harness.MODE_RF
            nv = harness._naf_volume_for(mode, ph.volume, maps)
            feats = extract_features(ph.volume, nv, g)
            training.append((g.column_object, harness.column_clusters(g),
                             feats, labels))
        save_rf_model(train_clustered_rf(training, trees_per_forest=args.trees,
                                         seed=args.seed), args.out)
    print(args.out)
    return 0


def _segment_phantom(args, overrides):
    ph = read_phantom(_phantom_dir(args.data_root, args.phantom))
    params = _graph_params(overrides)
    cfg = harness.ExperimentConfig(seed=args.seed)
    init_meshes = harness.corpus_mean_shapes([ph], cfg)
    g = harness.build_phantom_graph(ph, params, init_meshes=init_meshes)
    rf_model = load_rf_model(args.rf_model) if args.rf_model else None
    naf_maps = None
    if args.naf_model:
        naf_maps = harness._naf_maps(ph, load_naf_model(args.naf_model))
    costs = harness.cost_field_for_mode(args.mode, ph.volume, g,
                                        rf_model=rf_model, naf_maps=naf_maps)
    ctx = harness.segment(ph.volume, g, costs, with_kd=True)
    return ph, g, ctx


def _write_solution(ctx, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for (obj, surf), mesh in harness.solution_meshes(ctx).items():
        write_obj(mesh, os.path.join(out_dir, f"o{obj}_s{surf}.obj"))


def cmd_segment(args, overrides) -> int:
    _ph, g, ctx = _segment_phantom(args, overrides)
    _write_solution(ctx, args.out)
    g.save(os.path.join(args.out, "graph.sseg"))
    print(args.out)
    return 0


def cmd_jei_script(args, overrides) -> int:
    ph, g, ctx = _segment_phantom(args, overrides)
    truth_pos = harness.truth_position_table(
        g, harness.phantom_truth_meshes(ph))
    sol, history = harness.scripted_jei(ctx, truth_pos, ph.volume,
                                        max_rounds=args.rounds)
    err = np.abs(sol.x - truth_pos)
    err[truth_pos < 0] = 0.0
    if err.max() >= harness.JEI_DONE_NODES:
        print(f"warning: {len(history)} rounds, max residual "
              f"{err.max():.1f} nodes (target "
              f"{harness.JEI_DONE_NODES:g})", file=sys.stderr)
    _write_solution(ctx, args.out)
    print(f"{args.out} rounds={len(history)}")
    return 0


def cmd_evaluate(args, overrides) -> int:
    ph, g, ctx = _segment_phantom(args, overrides)
    truth_pos = harness.truth_position_table(
        g, harness.phantom_truth_meshes(ph))
    errors = harness.surface_error(ctx.solution.x, g, truth_pos)
    rep = harness.ErrorReport(mode=args.mode)
    rep.add(args.phantom, errors)
    text, _csv = harness.format_tables([rep])
    print(text, end="")
    return 0


def cmd_experiment_run(args, overrides) -> int:
    cfg = apply_overrides(harness.ExperimentConfig(seed=args.seed),
                          overrides, "experiment")
    out = args.out or os.path.join(args.data_root, "experiment")
    reports = harness.run_experiment(
        cfg, out, progress=(lambda m: print(m, file=sys.stderr))
        if args.verbose else None)
    with open(os.path.join(out, "errors.txt")) as f:
        print(f.read(), end="")
    del reports
    return 0


def cmd_serve(args, overrides) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(data_root=args.data_root,
                     graph_params=_graph_params(overrides))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="surfseg")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None, help="flat key=value file")
    p.add_argument("--data-root", default="data")
    sub = p.add_subparsers(dest="command", required=True)

    phantom = sub.add_parser("phantom").add_subparsers(dest="action",
                                                       required=True)
    gen = phantom.add_parser("gen")
    gen.add_argument("--name", default=None)
    gen.add_argument("--noise", type=float, default=None)
    gen.add_argument("--lesions", type=int, default=None)
    gen.set_defaults(func=cmd_phantom_gen)

    train = sub.add_parser("train")
    train.add_argument("stage", choices=("voi", "naf", "rf"))
    train.add_argument("phantoms", nargs="+")
    train.add_argument("--out", required=True)
    train.add_argument("--trees", type=int, default=20)
    train.add_argument("--patches", type=int, default=2000)
    train.add_argument("--patch", type=int, default=9)
    train.add_argument("--naf-model", default=None)
    train.set_defaults(func=cmd_train)

    seg = sub.add_parser("segment")
    seg.add_argument("phantom")
    seg.add_argument("--mode", choices=harness.MODES,
                     default=harness.MODE_GRADIENT)
    seg.add_argument("--out", required=True)
    seg.add_argument("--rf-model", default=None)
    seg.add_argument("--naf-model", default=None)
    seg.set_defaults(func=cmd_segment)

    jei = sub.add_parser("jei-script")
    jei.add_argument("phantom")
    jei.add_argument("--mode", choices=harness.MODES,
                     default=harness.MODE_GRADIENT)
    jei.add_argument("--out", required=True)
    jei.add_argument("--rounds", type=int, default=harness.JEI_MAX_ROUNDS)
    jei.add_argument("--rf-model", default=None)
    jei.add_argument("--naf-model", default=None)
    jei.set_defaults(func=cmd_jei_script)

    ev = sub.add_parser("evaluate")
    ev.add_argument("phantom")
    ev.add_argument("--mode", choices=harness.MODES,
                    default=harness.MODE_GRADIENT)
    ev.add_argument("--rf-model", default=None)
    ev.add_argument("--naf-model", default=None)
    ev.set_defaults(func=cmd_evaluate)

    exp = sub.add_parser("experiment").add_subparsers(dest="action",
                                                      required=True)
    run = exp.add_parser("run")
    run.add_argument("--out", default=None)
    run.add_argument("--verbose", action="store_true")
    run.set_defaults(func=cmd_experiment_run)

    srv = sub.add_parser("serve")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = read_config(args.config) if args.config else {}
    return args.func(args, overrides)


if __name__ == "__main__":
    sys.exit(main())
