"""
Landscapes and central place foraging
=====================================

A landscape is a raster of land-use categories. Each category carries a
floral-quality law per flowering period and a nesting probability; drawing
from them gives an attribute map. The foraging model turns an attribute map
and four parameters into a visitation intensity for every cell.
"""
import numpy as np

from cpfabc.cpf import CpfParams, max_flight_distance, nest_specific_distance, visitation_field
from cpfabc.landscape import default_profiles, generate_attribute_maps, synthetic_raster

# a 40 x 40 mosaic of fields, 30 m cells
raster = synthetic_raster(40, 40, resolution=30.0, seed=1, id="demo")
print("categories present:", raster.categories())

# attribute maps for period 2 (index 1), the mass-flowering period of arable land
profiles = default_profiles()
amap = generate_attribute_maps(raster, profiles, period=1, year=0, seed=2)
print("mean floral quality %.3f, nesting cells %d" % (amap.floral.mean(), int(amap.nesting.sum())))

# %%
# The maximum distance bees accept for a patch grows with its quality and
# saturates at tau0. Nests in rich surroundings fly shorter distances.
theta = CpfParams(tau0=800.0, f0=0.1, a=300.0, b=200.0)
for f in (0.1, 0.2, 0.5, 1.0):
    print(f"floral {f:4.2f} -> max flight distance {float(max_flight_distance(f, theta)):7.1f} m")
for s in (0.0, 1e4, 1e5, 1e6):
    print(f"suitability {s:9.0f} -> nest distance {float(nest_specific_distance(s, theta)):7.1f} m")

# %%
# The visitation field. Every nest that reaches at least one rewarding
# patch spreads its nesting value over the patches it visits, so total
# visitation never exceeds the total nesting value.
field = visitation_field(amap, theta)
print("total visitation %.3f, total nesting %.3f" % (field.nu.sum(), amap.nesting.sum()))
top = tuple(int(v) for v in np.unravel_index(np.argmax(field.nu), field.nu.shape))
print("busiest cell", top, "with intensity %.3f" % field.nu[top])
