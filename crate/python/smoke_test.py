"""Smoke test for the coref extension module."""

import math
import tempfile
from pathlib import Path

import coref

FIXTURES = Path(__file__).resolve().parents[1] / "crates" / "core" / "fixtures"
PAIRS = {("A", "B"): 0.671, ("A", "D"): 0.505, ("B", "D"): 0.752, ("C", "D"): 0.504}


def main():
    s = coref.CoreferenceSet.from_json((FIXTURES / "kinston.jsonl").read_text().strip())
    assert len(s) == 4 and s.count_configurations() == 7
    assert s.greedy_configuration() == [["A", "B"], ["C", "D"]]

    ev = coref.evidential_distribution(s, PAIRS)
    probs = [p for _, p in ev.entries()]
    assert abs(probs[0] - 0.383) < 1.5e-3, probs
    assert abs(sum(probs) - 1.0) < 1e-9
    assert ev.argmax() == [["A", "B", "D"], ["C"]]
    kept, remainder, count = ev.smooth(0.1)
    assert count == 3 and abs(remainder - 0.184) < 5e-4

    md = coref.merging_distribution(s, PAIRS)
    assert abs(md.probability([["A", "B"], ["C", "D"]]) - 0.338) < 1.5e-3
    assert abs(coref.uniform_distribution(s).cross_entropy([["A", "B", "D"], ["C"]]) - math.log2(7)) < 1e-12

    try:
        coref.greedy_distribution(s, 1.5, 0.5, 0.5)
    except coref.CorefError:
        pass
    else:
        raise AssertionError("invalid p_k accepted")

    corpus = coref.Corpus.synthetic(seed=3, sets=300, fidelity=0.8, noise=0.2)
    train, test = corpus.split(0.7, 3)
    model = train.train()
    assert model.weights() and model.training_cross_entropy < 1.0
    scores = test.evaluate(model)
    assert scores["evidential"][0] < scores["greedy"][0] < scores["uniform"][0], scores

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "model.json"
        model.save(path)
        again = coref.Model.load(path)
        assert again.to_json() == model.to_json()
    first = test.sets()[0]
    assert all(0.0 < p < 1.0 for p in model.pair_probabilities(first).values())
    assert abs(sum(p for _, p in model.distribution(first, "merging").entries()) - 1.0) < 1e-9

    print("smoke test passed:", {k: round(v[0], 3) for k, v in scores.items()})


if __name__ == "__main__":
    main()
