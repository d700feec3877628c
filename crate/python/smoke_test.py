"""Smoke test for the pystsleak extension module.

Build first, e.g. `maturin develop -m crates/py/Cargo.toml` inside a virtualenv.
"""

import os
import tempfile

import pystsleak as sl


def main():
    alpha = 0.15
    tx = sl.Transmitter(alpha)
    assert abs(tx.alpha - alpha) < 1e-12
    sts = tx.sts(0xA5)
    assert len(sts) == 160
    assert all(abs(sts[n] - sts[n + 16]) < 1e-12 for n in range(144))

    payload = [bool((i * 7) % 3) for i in range(240)]
    eve = sl.Eve(alpha)
    bob = sl.Bob()

    clean = tx.frame(0xA5, payload)
    assert eve.decode(clean) == 0xA5
    assert bob.decode(clean) == payload

    noisy = sl.Channel(snr_db=30.0, cfo_hz=2000.0, phase_rad=1.0, timing_offset=80, seed=7).apply(clean)
    byte, margins = eve.decode_with_margins(noisy)
    assert byte == 0xA5 and len(margins) == 8
    assert bob.decode(noisy) == payload
    # Three payload symbols give the pilot fit little leverage; full frames do better.
    assert abs(bob.cfo_hz(noisy) - 2000.0) < 500.0
    assert eve.decode([0j] * 1000) is None

    weights = sl.victim_stream("f32")
    assert len(weights) == 1484
    assert len(sl.victim_stream("int8")) == 371 + 12
    acc, baseline = sl.stream_accuracy(weights, "f32")
    assert acc == baseline >= 0.95

    copies = [sl.inject_bit_flips(weights, 0.01, s) for s in range(5)]
    assert sl.majority_vote([weights] * 3) == weights
    voted = sl.majority_vote(copies)
    assert len(voted) == len(weights)
    assert sl.post_vote_ber(7e-4, 3) < 1e-5
    r, predicted = sl.plan_repetitions(1e-3, 1e-6)
    assert r % 2 == 1 and predicted <= 1e-6

    assert abs(sl.covert_throughput() - 1e6 / 322) < 1e-9
    rows = sl.case_study_table()
    assert len(rows) == 5 and rows[0][4] == "79s"
    assert abs(sl.leak_time(246824, 4, 3105.0) - 246824 / 3105.0) < 1e-9

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "frame.cf32")
        sl.write_cf32(path, noisy)
        back = sl.read_cf32(path)
        assert os.path.getsize(path) == 8 * len(noisy)
        assert max(abs(a - b) for a, b in zip(back, noisy)) < 1e-5
        assert eve.decode(back) == 0xA5

    try:
        sl.Transmitter(1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("alpha 1.5 accepted")

    print("pystsleak smoke test passed")


if __name__ == "__main__":
    main()
