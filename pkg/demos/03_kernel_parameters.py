"""How many parameters does a length-n global kernel cost?

The multi-scale kernel grows by one block of l0 reals each time n doubles,
while a dense kernel grows linearly.
"""

from gcformer.kernels import dense_param_count, msk_num_scales, msk_param_count
from gcformer.model import GCformerModel, ModelConfig

l0 = 16
print(f"{'n':>6}{'scales':>8}{'msk':>8}{'dense':>8}")
for n in (96, 192, 336, 720, 1440, 2880):
    print(f"{n:>6}{msk_num_scales(n, l0):>8}{msk_param_count(n, l0, 1):>8}{dense_param_count(n, 1):>8}")

print("\nfull model, per component (default config):")
for kernel in ("msk", "freq", "leg"):
    groups = GCformerModel.init(ModelConfig(kernel=kernel), 0).parameter_groups()
    print(f"  {kernel:5s}", dict(groups), "total", sum(groups.values()))
