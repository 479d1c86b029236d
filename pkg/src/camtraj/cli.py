"""Command-line surface: data generation, training, generation, serving.

Training verbs write checkpoints into the model directory under the same
names the service reads, so `camtraj train-tokenizer && camtraj train-gpt
&& camtraj serve` is a complete local workflow.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import click

from . import __version__
from .anchors import load_scene
from .dataset import DatasetConfig, canonical_primitive_grid, gen_primitive, generate_item
from .errors import CamtrajError
from .evaluate import evaluate_pairs, format_report, heldout_pairs, report_to_dict, training_pairs
from .geometry import camera_path_dict, trajectory_to_dict
from .gpt import (
    GptConfig,
    STAGE1_CONFIG,
    STAGE2_CONFIG,
    SamplerParams,
    TOKENIZER_PIPELINE_CONFIG,
    Vocab,
    build_gpt,
    build_pretraining_corpus,
    build_translation_corpus,
    finetune_translation,
    save_gpt,
    train_stage1,
)
from .planner import execute_plan, plan_from_dict, plan_to_dict, run_pipeline, trajectory_digest
from .service import GPT_FILE, TOKENIZER_FILE, ServiceConfig, load_models, run_service
from .tokenizer import load_tokenizer, save_tokenizer, train_tokenizer


@click.group()
@click.version_option(__version__, prog_name="camtraj")
@click.option("--seed", default=0, show_default=True, help="Base RNG seed for every command.")
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file with option defaults (model_dir, scene_dir, host, port, ...).",
)
@click.option("--model-dir", default=None, help="Checkpoint directory.  [default: models]")
@click.pass_context
def main(ctx, seed, config_path, model_dir):
    """Natural-language camera trajectories: train, generate, evaluate, serve."""
    cfg = json.loads(Path(config_path).read_text()) if config_path else {}
    ctx.obj = {
        "seed": int(seed),
        "config": cfg,
        "model_dir": Path(model_dir or cfg.get("model_dir", "models")),
    }


def _require_models(obj):
    models = load_models(obj["model_dir"])
    if models is None:
        raise click.ClickException(
            f"no checkpoints in {obj['model_dir']}; run train-tokenizer and train-gpt first"
        )
    return models


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


@main.command("gen-data")
@click.option("--count", default=64, show_default=True, help="Number of pairs to sample.")
@click.option("--max-primitives", default=4, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Output JSONL path.")
@click.pass_obj
def gen_data(obj, count, max_primitives, out):
    """Sample synthetic text/trajectory pairs as JSON lines."""
    config = DatasetConfig(max_primitives=max_primitives)
    with open(out, "w") as fh:
        for i in range(count):
            pair, ps = generate_item(obj["seed"], i, config)
            fh.write(
                json.dumps(
                    {
                        "text": pair.text,
                        "trajectory": trajectory_to_dict(pair.traj),
                        "kinds": [p.kind for p in ps],
                    }
                )
                + "\n"
            )
    click.echo(f"wrote {count} pairs to {out}")


@main.command("train-tokenizer")
@click.option("--steps", default=TOKENIZER_PIPELINE_CONFIG.steps, show_default=True)
@click.pass_obj
def train_tokenizer_command(obj, steps):
    """Train the trajectory codec on the canonical primitive grid."""
    cfg = replace(TOKENIZER_PIPELINE_CONFIG, steps=steps)
    trajs = [gen_primitive(p, cfg.frames, 4.0) for p in canonical_primitive_grid()]
    result = train_tokenizer(trajs, cfg, seed=obj["seed"])
    obj["model_dir"].mkdir(parents=True, exist_ok=True)
    path = obj["model_dir"] / TOKENIZER_FILE
    save_tokenizer(result.net, path)
    click.echo(f"trained {steps} steps; saved {path}")


@main.command("train-gpt")
@click.option("--stage1-steps", default=STAGE1_CONFIG.steps, show_default=True)
@click.option("--stage2-steps", default=STAGE2_CONFIG.steps, show_default=True)
@click.pass_obj
def train_gpt_command(obj, stage1_steps, stage2_steps):
    """Two-stage language-trajectory training against the saved tokenizer."""
    tok_path = obj["model_dir"] / TOKENIZER_FILE
    if not tok_path.exists():
        raise click.ClickException(f"{tok_path} not found; run train-tokenizer first")
    tok = load_tokenizer(tok_path)
    seed = obj["seed"]
    vocab = Vocab.from_dataset(tok.config.codebook_size)
    model = build_gpt(vocab, GptConfig(), seed=seed)
    pre = build_pretraining_corpus(vocab, tok, seed=seed, m_frames=tok.config.frames)
    train_stage1(model, pre, replace(STAGE1_CONFIG, steps=stage1_steps), seed=seed)
    fine = build_translation_corpus(vocab, tok, m_frames=tok.config.frames)
    finetune_translation(model, fine, replace(STAGE2_CONFIG, steps=stage2_steps), seed=seed + 1)
    path = obj["model_dir"] / GPT_FILE
    save_gpt(model, path)
    click.echo(f"trained {stage1_steps}+{stage2_steps} steps; saved {path}")


@main.command()
@click.argument("prompt")
@click.option("--scene", "scene_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write response JSON to a file instead of stdout.")
@click.option("--export", "export_path", type=click.Path(dir_okay=False), default=None, help="Also write a camera-path export.")
@click.option("--mode", type=click.Choice(["greedy", "top_k", "nucleus"]), default="greedy", show_default=True)
@click.option("--temperature", default=1.0, show_default=True)
@click.option("--refine/--no-refine", default=False, help="Gradient-refine scene anchors.")
@click.pass_obj
def generate(obj, prompt, scene_path, out, export_path, mode, temperature, refine):
    """Generate a trajectory from a natural-language PROMPT."""
    models = _require_models(obj)
    scene = load_scene(scene_path) if scene_path else None
    sampler = SamplerParams(mode=mode, temperature=temperature, seed=obj["seed"])
    try:
        traj, plan, trace = run_pipeline(
            prompt, models, scene=scene, seed=obj["seed"], sampler=sampler, refine=refine
        )
    except CamtrajError as err:
        raise click.ClickException(f"{err.code}: {err}")
    body = {
        "trajectory": trajectory_to_dict(traj),
        "trajectory_id": trajectory_digest(traj),
        "plan": plan_to_dict(plan),
        "trace": trace.to_dict(include_timings=False),
        "seed": obj["seed"],
    }
    if out:
        _write_json(out, body)
        click.echo(f"wrote {out} ({len(traj)} frames, {traj.duration_s:.2f}s)")
    else:
        click.echo(json.dumps(body, indent=2))
    if export_path:
        _write_json(export_path, camera_path_dict(traj))
        click.echo(f"wrote {export_path}")


@main.command("compose")
@click.argument("plan_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--scene", "scene_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def compose_command(obj, plan_file, scene_path, out):
    """Execute an explicit plan document (skips language parsing)."""
    models = _require_models(obj)
    scene = load_scene(scene_path) if scene_path else None
    try:
        plan = plan_from_dict(json.loads(Path(plan_file).read_text()))
        traj, trace = execute_plan(plan, models, scene=scene, seed=obj["seed"])
    except CamtrajError as err:
        raise click.ClickException(f"{err.code}: {err}")
    body = {
        "trajectory": trajectory_to_dict(traj),
        "trajectory_id": trajectory_digest(traj),
        "trace": trace.to_dict(include_timings=False),
        "seed": obj["seed"],
    }
    if out:
        _write_json(out, body)
        click.echo(f"wrote {out} ({len(traj)} frames, {traj.duration_s:.2f}s)")
    else:
        click.echo(json.dumps(body, indent=2))


@main.command("eval")
@click.option(
    "--set",
    "which",
    type=click.Choice(["heldout", "training"]),
    default="heldout",
    show_default=True,
    help="heldout: 32 reserved-template pairs; training: the 16 protocol texts.",
)
@click.option("--json", "json_out", type=click.Path(dir_okay=False), default=None, help="Also write the machine-readable report.")
@click.pass_obj
def eval_command(obj, which, json_out):
    """Report translation/rotation MSE against synthetic ground truth."""
    models = _require_models(obj)
    pairs = heldout_pairs() if which == "heldout" else training_pairs()
    report = evaluate_pairs(
        models.tokenizer, models.model, pairs, SamplerParams(seed=obj["seed"])
    )
    click.echo(format_report(report))
    if json_out:
        _write_json(json_out, report_to_dict(report))


@main.command()
@click.option("--host", default=None, help="Bind address.  [default: 127.0.0.1]")
@click.option("--port", default=None, type=int, help="Bind port.  [default: 8000]")
@click.option("--scene-dir", default=None, envvar="CAMTRAJ_SCENE_DIR", help="Directory of scene manifests.")
@click.option("--planner-url", default=None, envvar="CAMTRAJ_PLANNER_URL")
@click.option("--planner-model", default=None, envvar="CAMTRAJ_PLANNER_MODEL")
@click.option("--planner-api-key", default=None, envvar="CAMTRAJ_PLANNER_API_KEY")
@click.option("--embed-url", default=None, envvar="CAMTRAJ_EMBED_URL")
@click.pass_obj
def serve(obj, host, port, scene_dir, planner_url, planner_model, planner_api_key, embed_url):
    """Start the HTTP service."""
    cfg = obj["config"]
    service_config = ServiceConfig(
        model_dir=str(obj["model_dir"]),
        scene_dir=scene_dir or cfg.get("scene_dir"),
        host=host or cfg.get("host", "127.0.0.1"),
        port=int(port if port is not None else cfg.get("port", 8000)),
        default_seed=obj["seed"],
        planner_url=planner_url or cfg.get("planner_url"),
        planner_model=planner_model or cfg.get("planner_model"),
        planner_api_key=planner_api_key or cfg.get("planner_api_key"),
        embed_url=embed_url or cfg.get("embed_url"),
    )
    run_service(service_config)


if __name__ == "__main__":
    main()
