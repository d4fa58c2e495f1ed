"""Four explainers, one prediction, four different stories.

A small neural network is trained on synthetic tabular data and a single
positive prediction is explained by gradients, integrated gradients, a local
surrogate, and kernel Shapley values. The signed importance vectors disagree
about both magnitude and sign ordering, which is exactly why explanation
quality needs measuring rather than trusting.
"""
import numpy as np

from axebench import (ExplainerConfig, MlpSpec, SyntheticSpec, explain_gradient,
                      explain_integrated_gradients, explain_kernel_shapley,
                      explain_local_surrogate, generate_synthetic, train_mlp)

data = generate_synthetic(SyntheticSpec(nu=400, n_features=6, seed=7,
                                        generator_kind="gaussian-blobs"))
model = train_mlp(data, MlpSpec(hidden_sizes=(12,), epochs=400, seed=1))

# a positive prediction away from the saturated tail, where gradients are alive
probas = model.predict_proba_batch(data.features)
row = int(np.argmin(np.abs(probas - 0.75)))
x = data.features[row]
print(f"model: {model.descriptor}")
print(f"explaining row {row} (predicted positive, p={model.predict_proba(x):.3f})\n")

explanations = {
    "gradients": explain_gradient(model, x),
    "integrated gradients": explain_integrated_gradients(
        model, x, ExplainerConfig(kind="integrated-gradients", ig_steps=128)),
    "local surrogate": explain_local_surrogate(
        model, x, data, ExplainerConfig(kind="local-surrogate", samples=2000, seed=5)),
    "kernel shapley": explain_kernel_shapley(
        model, x, data, ExplainerConfig(kind="kernel-shapley", samples=500, seed=5)),
}

header = f"{'explainer':<22}" + "".join(f"{n:>9}" for n in data.feature_names)
print(header)
print("-" * len(header))
for name, e in explanations.items():
    row = "".join(f"{v:>9.3f}" for v in e.importances)
    top = int(np.argmax(np.abs(e.importances)))
    print(f"{name:<22}{row}   top: {data.feature_names[top]}")

tops = {int(np.argmax(np.abs(e.importances))) for e in explanations.values()}
print(f"\ndistinct top-ranked features across explainers: {len(tops)}")
