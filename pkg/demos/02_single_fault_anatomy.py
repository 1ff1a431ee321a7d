"""
Anatomy of a single parameter fault
===================================

Corrupts the reference detector by hand, one bit at a time, to show why
campaign results look the way they do: mantissa flips vanish into the
noise floor, high exponent flips blow the score up to non-finite, and
direction filters turn flips into no-ops when the bit already has the
target value.
"""

from pathlib import Path

import numpy as np

from flowfi.campaign import bit_census
from flowfi.faults import Direction, flip_bit, inject_states, restore, snapshot
from flowfi.faults import BitFlip, BitSelector, SignFilter, StateInjectionPlan, StateVariable
from flowfi.model import log_prob
from flowfi.modelio import load_dataset, load_model
from flowfi.rng import derive_stream

FIXTURES = Path(__file__).resolve().parent.parent / "data" / "fixtures"

model = load_model(FIXTURES / "c4d3u32.rnvp")
data = load_dataset(FIXTURES / "test.csv")
window = data.x[data.labels == 0][:1]
clean_lp = float(log_prob(model, window)[0])
print(f"clean log_prob of one nominal window: {clean_lp:.3f}")

# flip single bits of one weight and watch the value
w = model.layers[0].scale_net[0].weights[0, 0]
print(f"\ntarget weight: {w!r}")
for bit in (2, 21, 23, 27, 30):
    flipped, masked = flip_bit(w, bit)
    print(f"  bit {bit:2d} -> {flipped!r}" + ("  (masked)" if masked else ""))

# direction filters: a 1to0 flip of a bit that is already 0 does nothing
_, masked = flip_bit(np.float32(1.0), 30, Direction.ONE_TO_ZERO)
print(f"\n1to0 flip of bit 30 on 1.0 (bit already 0): masked={masked}")

# the census explains the campaign's bit-30 asymmetry: trained weights
# are small, so bit 30 is never set and 1to0 flips can never fire
census = bit_census(model)
set30 = int(census.weights[30] + census.biases[30])
set21 = int(census.weights[21] + census.biases[21])
print(f"parameters with bit 30 set: {set30}, with bit 21 set: {set21}")

# now a full state injection, exactly what one campaign experiment does
plan = StateInjectionPlan(
    mode=100,  # hit every FC layer
    variable=StateVariable.ALL,
    fault=BitFlip(BitSelector(30), Direction.ZERO_TO_ONE, SignFilter.BOTH),
    amount=10.0,  # corrupt 10% of each layer's values
)
faulty, report = inject_states(model, plan, derive_stream(4242, (7,)))
faulty_lp = log_prob(faulty, window)[0]
print(f"\nafter {len(report)} bit-30 0to1 flips: log_prob = {faulty_lp!r}")
print("non-finite score, so the runner would record a DUE, not a wrong label")

# injection corrupts a copy; the clean model is untouched, and the
# runner additionally snapshots and restores around every experiment
restore(snapshot(model))
print(f"clean model still scores {float(log_prob(model, window)[0]):.3f}")
