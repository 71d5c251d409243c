"""Smoke test for the smartaug extension module.

Build and install it first:

    pip install maturin
    pip install --no-build-isolation -e crates/python
"""

import math
import os
import tempfile

import smartaug


def tiny_config(**overrides):
    base = dict(
        num_net_a=1,
        epochs=2,
        batch_size=8,
        image_height=8,
        image_width=8,
        a_filters=2,
        b_conv1=2,
        b_conv2=2,
        b_dense=8,
        synthetic_train=20,
        synthetic_val=8,
        synthetic_test=8,
        seed=3,
    )
    base.update(overrides)
    return smartaug.ExperimentConfig(**base)


def main():
    assert abs(smartaug.combined_loss(2.0, 1.0, 0.3, 0.7) - 1.3) < 1e-15
    try:
        smartaug.combined_loss(1.0, 1.0, 0.0, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("alpha = beta = 0 must be rejected")

    cfg = smartaug.ExperimentConfig.parse("num_net_a = 2\nepochs = 5\n")
    assert cfg.learning_rate == 0.005
    assert smartaug.ExperimentConfig.parse(cfg.serialize()) == cfg
    assert cfg.replace(seed=11).seed == 11

    images, labels, shape = smartaug.gen_synthetic(4, 8, 8, seed=1)
    assert shape == (1, 8, 8) and len(images) == 8 and labels[:2] == [0, 1]
    assert all(0.0 <= v <= 1.0 for img in images for v in img)

    result = smartaug.train(tiny_config())
    assert len(result.metrics) == 2
    assert all(r["train_loss_a"] is not None for r in result.metrics)
    assert result.eval_a_forward_passes == 0
    assert 0.0 <= result.test_accuracy <= 1.0
    again = smartaug.train(tiny_config())
    assert again.metrics_csv() == result.metrics_csv()
    records, acc = smartaug.parse_metrics_csv(result.metrics_csv())
    assert acc == result.test_accuracy and len(records) == 2

    baseline = smartaug.train(tiny_config(num_net_a=0))
    assert all(r["train_loss_a"] is None for r in baseline.metrics)

    with tempfile.TemporaryDirectory() as tmp:
        run_dir = smartaug.train_to_dir(tiny_config(exp_id=4), tmp)
        assert os.path.basename(run_dir) == "exp4_seed3"
        ckpt = smartaug.load_checkpoint(os.path.join(run_dir, "network_b.saug"))
        assert ckpt and all(math.prod(s) == len(v) for s, v in ckpt.values())
        copy = os.path.join(tmp, "copy.saug")
        smartaug.save_checkpoint(copy, ckpt)
        assert smartaug.load_checkpoint(copy) == ckpt
        with open(os.path.join(run_dir, "metrics.csv")) as f:
            assert smartaug.parse_metrics_csv(f.read())[1] is not None

    print("smoke test passed:", result)


if __name__ == "__main__":
    main()
