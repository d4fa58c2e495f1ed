"""Why reference-comparison metrics cannot tell similar models apart.

We score every candidate explanation (i1, i2) in [-1, 1]^2 against a fixed
two-feature reference vector. Each agreement metric is piecewise constant over
large regions, and swapping the reference for any vector with the same ordering
(here (0.7, 0.3) versus (0.5, 0.3)) changes nothing at all: two models with
genuinely different coefficient ratios receive identical quality maps.
"""
import numpy as np

from axebench import RegionGridSpec, run_region_grid, write_region_grid

spec_a = RegionGridSpec(e_star=(0.7, 0.3), resolution=81)
spec_b = RegionGridSpec(e_star=(0.5, 0.3), resolution=81)
result_a = run_region_grid(spec_a)
result_b = run_region_grid(spec_b)

print("distinct quality values over the whole plane:")
for metric, values in result_a.value_sets.items():
    print(f"  {metric}: {values}")

print("\nquality maps identical after swapping the reference vector:",
      all(np.array_equal(result_a.grids[m], result_b.grids[m]) for m in result_a.grids))

print("\ncoarse map of signed-rank agreement (rows: i1 top to bottom, cols: i2):")
grid = result_a.grids["sra"]
step = max(1, grid.shape[0] // 16)
glyphs = {0.0: ".", 0.5: "o", 1.0: "#"}
for i in range(grid.shape[0] - 1, -1, -step):
    print("  " + "".join(glyphs.get(float(grid[i, j]), "?")
                         for j in range(0, grid.shape[1], step)))
print("  (# = 1.0, o = 0.5, . = 0.0; the # block is every i1 > i2 > 0 cell)")

out = write_region_grid(result_a, "demo_output/region_maps")
print(f"\nwrote {len(out)} files under demo_output/region_maps/")
