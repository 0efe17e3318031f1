"""Time voxelization and rendering under the current COHERENT_THREADS setting."""

import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from coherent import parallel, raster, shapes  # noqa: E402
from coherent.mesh import TriMesh  # noqa: E402
from coherent.sdf import voxelize_phi  # noqa: E402

import scenes  # noqa: E402


def best_of(fn, reps):
    fn()  # warm-up (JIT compile or cache load)
    times = []
    for _ in range(reps):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times) * 1000.0


def main():
    blob = shapes.body_blob()

    def vox():
        # a fresh mesh object so the watertightness check is timed as well
        voxelize_phi(TriMesh(blob.vertices, blob.faces), resolution=32)

    out = {"workers": parallel.get_workers(), "voxelize_ms": best_of(vox, 7)}
    for key, args in (("render_ms", (1, 1)), ("render_2f_ms", (2, 1)), ("render_2wh_ms", (1, 2))):
        scene = scenes.perf_scene(*args)
        out[key] = best_of(lambda: raster.render(scene), 9)
    print(json.dumps(out))


if __name__ == "__main__":
    main()
