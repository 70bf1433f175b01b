"""
Agents and mailboxes
====================

The simulator runs one object per agent. Each iteration has a fixed sequence
of barrier phases, and every message goes through a single-slot mailbox on
its edge. Running the agents on a thread pool gives bit-for-bit the same
iterates as the serial schedule.
"""

import numpy as np

from dnadmm import Hyper, run_distributed
from dnadmm.instances import consensus_average_problem

# five agents on a path, each holding a scalar; the optimum is the mean
centers = [4.0, -1.0, 2.5, 0.0, 7.0]
problem = consensus_average_problem(centers)

serial, stats = run_distributed(problem, Hyper(mu=1.0, eps=0.0, K=2), 200)
threaded, _ = run_distributed(problem, Hyper(mu=1.0, eps=0.0, K=2), 200, parallel=True, workers=3)

print("final agent values:", serial.x[-1].ravel())
print("mean of centers:   ", np.mean(centers))
print("identical to threaded run:", all(a.tobytes() == b.tobytes() for a, b in zip(serial.x, threaded.x)))

# %%
# Each iteration sends K + 1 vectors to every neighbor.
print("messages sent per agent:", stats.sent, "over", stats.iterations, "iterations")
print("agent degrees:          ", problem.graph.degrees)
