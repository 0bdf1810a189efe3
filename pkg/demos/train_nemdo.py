"""Train a small NeMDO x-derivative model and compare its moments with SPH.

This uses a reduced dataset and 40 epochs so it finishes in about a
minute. At that budget the learned moments are still a little worse than
SPH. The desk configuration in the README (20000 stencils, 300 epochs)
brings the mean moment error to about a third of the SPH value.

Run: python demos/train_nemdo.py
"""
import numpy as np

from meshfree.diagnostics.accuracy import moment_table
from meshfree.diagnostics.providers import NemdoProvider, SphProvider
from meshfree.geometry import unit_square_cloud
from meshfree.nemdo.config import ModelConfig, TrainConfig
from meshfree.nemdo.dataset import generate_dataset
from meshfree.nemdo.infer import NemdoModel
from meshfree.nemdo.train import train

data = generate_dataset(6000, stencil_n=10, epsilon=1.0, seed=0)
print("dataset", data.counts())

cfg = ModelConfig(stencil_n=10, order_p=2, kind="dx", f_h=32)
res = train(data, cfg, TrainConfig(epochs=40, learning_rate=1e-3, batch_size=128),
            callback=lambda row: row["epoch"] % 10 == 0 and print(
                f"epoch {row['epoch']:3d}  train {row['train_loss']:.3e}  val {row['val_loss']:.3e}"))
print(f"best validation loss {res.best_val:.3e} (epoch {res.best_epoch})")

model = NemdoModel(res.params, cfg)
clouds = [unit_square_cloud(1 / 30, 1.0, seed=s) for s in (101, 102)]
for provider in (NemdoProvider([model]), SphProvider("quintic")):
    rep = moment_table(provider, "dx", clouds)
    print(f"{provider.name:12s} MAE per moment", np.array2string(rep.mae, precision=4))
