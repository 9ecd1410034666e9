#!/usr/bin/env python3
"""Regenerates the end-to-end fixtures: synthetic images, a planted-keyframe
video, and mock-backed engine configs. Deterministic; safe to rerun."""
import json
from pathlib import Path

from PIL import Image, ImageDraw

ROOT = Path(__file__).resolve().parent
SIZE = (256, 256)
CERVIX_SIZE = (256, 128)
FRAMES = 30
FPS = 10

# Planted scorer peaks: frame -> (class, probability). Everything else is non_key.
PEAKS = {
    3: ("brain", 0.92),
    4: ("brain", 0.88),
    15: ("brain", 0.95),
    24: ("abdomen", 0.90),
    25: ("abdomen", 0.70),
}


def ellipse_image(path, size, a, b, fill):
    img = Image.new("L", size, 0)
    cx, cy = size[0] / 2, size[1] / 2
    ImageDraw.Draw(img).ellipse([cx - a, cy - b, cx + a, cy + b], outline=fill, width=3)
    img.save(path, optimize=True)


def runs(width, height, inside):
    out, start = [], None
    for idx in range(width * height):
        y, x = divmod(idx, width)
        if inside(x, y):
            if start is None:
                start = idx
        elif start is not None:
            out.append([start, idx - start])
            start = None
    if start is not None:
        out.append([start, width * height - start])
    return {"width": width, "height": height, "runs": out}


def aop_mask_set():
    w, h = CERVIX_SIZE
    symphysis = runs(w, h, lambda x, y: 20 <= x <= 70 and 58 <= y <= 62)
    head = runs(w, h, lambda x, y: (x - 130) ** 2 + (y - 80) ** 2 <= 30 ** 2)
    return {"kind": "mask_set", "masks": {"head": head, "symphysis": symphysis}}


def dist(**probs):
    return {"kind": "class_distribution", "probs": probs}


def frame_dist(i):
    if i in PEAKS:
        cls, p = PEAKS[i]
        return dist(**{cls: p, "non_key": round(1 - p, 2)})
    return dist(non_key=1.0)


def tool(tool_id, task, mock, weight=1.0):
    return {"tool_id": tool_id, "task_types": [task], "transport": {"type": "builtin", "mock": mock},
            "weight": weight}


def expert(expert_id, task, tools, **extra):
    return {"expert_id": expert_id, "task": task, "tools": tools, **extra}


def full_config():
    mocks = {
        "plane_a": {"kind": "lookup", "table": {
            "brain_01": dist(brain=0.9, other=0.1),
            "abdomen_01": dist(abdomen=0.8, thorax=0.2),
            "cervix_01": dist(maternal_cervix=0.95, other=0.05),
        }},
        "plane_b": {"kind": "lookup", "table": {
            "brain_01": {"kind": "noisy", "base": dist(brain=0.8, other=0.2), "seed": 11, "amplitude": 0.1},
            "abdomen_01": {"kind": "noisy", "base": dist(abdomen=0.7, thorax=0.3), "seed": 11, "amplitude": 0.1},
            "cervix_01": dist(maternal_cervix=0.9, other=0.1),
        }},
        "subplane_a": {"kind": "lookup", "table": {
            "brain_01": dist(trans_thalamic=0.8, trans_ventricular=0.2),
        }},
        "head_seg_a": {"kind": "synthetic_ellipse", "center": [128, 128], "semi_axes": [65, 50]},
        "head_seg_b": {"kind": "synthetic_ellipse", "center": [128, 128], "semi_axes": [64, 51]},
        "head_seg_c": {"kind": "synthetic_ellipse", "center": [129, 128], "semi_axes": [65, 50]},
        "hc_a": {"kind": "synthetic_ellipse", "center": [128, 128], "semi_axes": [65, 50]},
        "hc_b": {"kind": "synthetic_ellipse", "center": [128, 128], "semi_axes": [64, 51], "rotation": 0.2,
                 "confidence": 0.9},
        "hc_c": {"kind": "biometry", "measure": "hc", "value": 182.0, "unit": "mm", "confidence": 0.8},
        "ga_a": {"kind": "biometry", "measure": "ga", "value": 20.3, "unit": "weeks"},
        "ga_b": {"kind": "noisy", "base": {"kind": "biometry", "measure": "ga", "value": 20.0, "unit": "weeks"},
                 "seed": 7, "amplitude": 0.02},
        "abdomen_seg_a": {"kind": "synthetic_ellipse", "center": [128, 128], "semi_axes": [60, 52]},
        "stomach_seg_a": {"kind": "synthetic_ellipse", "center": [110, 120], "semi_axes": [12, 8]},
        "ac_a": {"kind": "synthetic_ellipse", "center": [128, 128], "semi_axes": [60, 52]},
        "ac_b": {"kind": "synthetic_ellipse", "center": [128, 130], "semi_axes": [59, 53]},
        "aop_a": {"kind": "lookup", "table": {"cervix_01": aop_mask_set()}},
        "scorer_a": {"kind": "lookup", "table": {f"f{i:02d}": frame_dist(i) for i in range(FRAMES)}
                     | {f"q{i:02d}": dist(non_key=1.0) for i in range(10)}},
    }
    experts = [
        expert("plane", "plane_classification", [tool("plane_a", "plane_classification", "plane_a", 2.0),
                                                  tool("plane_b", "plane_classification", "plane_b")]),
        expert("subplane", "brain_subplane_classification",
               [tool("subplane_a", "brain_subplane_classification", "subplane_a")]),
        expert("head_seg", "head_segmentation", [tool(f"head_seg_{s}", "head_segmentation", f"head_seg_{s}")
                                                 for s in "abc"]),
        expert("hc", "hc_measurement", [tool(f"hc_{s}", "hc_measurement", f"hc_{s}") for s in "abc"],
               min_successes=2),
        expert("ga", "ga_estimation", [tool("ga_a", "ga_estimation", "ga_a"), tool("ga_b", "ga_estimation", "ga_b")]),
        expert("abdomen_seg", "abdomen_segmentation",
               [tool("abdomen_seg_a", "abdomen_segmentation", "abdomen_seg_a")]),
        expert("stomach_seg", "stomach_segmentation",
               [tool("stomach_seg_a", "stomach_segmentation", "stomach_seg_a")]),
        expert("ac", "ac_measurement", [tool("ac_a", "ac_measurement", "ac_a"), tool("ac_b", "ac_measurement", "ac_b")]),
        expert("aop", "aop", [tool("aop_a", "aop", "aop_a")]),
        expert("keyframe", "video_summary", [tool("scorer_a", "video_summary", "scorer_a")]),
    ]
    return {
        "experts": experts,
        "mocks": mocks,
        "charts": {"hc": "../charts/synthetic_hc.csv", "ac": "../charts/synthetic_ac.csv"},
        "video": {"threshold": 0.5, "top_m": 3, "stride": 1},
        "timeout_ms": 5000,
        "parallelism": 4,
    }


def minimal_config():
    return {
        "experts": [expert("plane", "plane_classification", [tool("plane_a", "plane_classification", "const_brain")])],
        "timeout_ms": 5000,
    }


def failing_config():
    cfg = full_config()
    cfg["mocks"]["hc_a"] = {"kind": "lookup", "table": {}}
    cfg["mocks"]["hc_b"] = {"kind": "lookup", "table": {}}
    cfg["mocks"]["hc_c"] = {"kind": "lookup", "table": {}}
    return cfg


def write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def main():
    images = ROOT / "images"
    frames = ROOT / "frames"
    images.mkdir(exist_ok=True)
    frames.mkdir(exist_ok=True)
    ellipse_image(images / "brain_01.png", SIZE, 65, 50, 200)
    ellipse_image(images / "abdomen_01.png", SIZE, 60, 52, 160)
    ellipse_image(images / "cervix_01.png", CERVIX_SIZE, 30, 30, 220)
    for i in range(FRAMES):
        shade = 40 + int(100 * (PEAKS.get(i, ("", 0.0))[1]))
        ellipse_image(frames / f"f{i:02d}.png", SIZE, 60 + i % 6, 50, shade)

    write_json(ROOT / "config.json", full_config())
    write_json(ROOT / "config_minimal.json", minimal_config())
    write_json(ROOT / "config_failing.json", failing_config())
    write_json(ROOT / "video.json", {
        "id": "scan_01", "fps": FPS, "pixel_spacing_mm": 0.5,
        "frames": [f"frames/f{i:02d}.png" for i in range(FRAMES)],
        "metadata": {"lmp_date": "2026-01-01", "exam_date": "2026-05-21"},
    })
    write_json(ROOT / "video_nonkey.json", {
        "id": "scan_02", "fps": FPS, "pixel_spacing_mm": 0.5,
        "frames": [{"path": f"frames/f{i:02d}.png", "id": f"q{i:02d}"} for i in range(10)],
    })
    write_json(ROOT / "video_empty.json", {"id": "scan_03", "fps": FPS, "frames": []})


if __name__ == "__main__":
    main()
