"""Concrete interpreter for the toy IR.

One *run* processes one channel message: inputs hold the message fields,
state variables hold the operational state and locals start at their domain
minimum. The run ends when a sink fires, a branch exits, a channel policy
drops the message, a block has no matching successor, or the step bound is
reached.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from scara.model import Assign, Branch, Guard, ReadChannel, Sink, ToyArtifact

STEP_BOUND = 10_000


@dataclass
class RunResult:
    trace: list[str] = field(default_factory=list)
    sink: str | None = None
    dropped: str | None = None  # channel whose policy dropped the message
    guard_hits: list[tuple[str, dict]] = field(default_factory=list)
    status: str = "ok"  # ok | bound
    env: dict = field(default_factory=dict)


def initial_env(artifact: ToyArtifact, inputs: Mapping[str, int], state: Mapping[str, int]) -> dict:
    env = {}
    for v in artifact.variables:
        if v.role == "input" and v.name in inputs:
            env[v.name] = int(inputs[v.name])
        elif v.role == "state" and v.name in state:
            env[v.name] = int(state[v.name])
        else:
            env[v.name] = v.minimum
    return env


def run(
    artifact: ToyArtifact,
    inputs: Mapping[str, int],
    state: Mapping[str, int],
    step_bound: int = STEP_BOUND,
) -> RunResult:
    env = initial_env(artifact, inputs, state)
    return run_env(artifact, env, step_bound)


def run_env(artifact: ToyArtifact, env: dict, step_bound: int = STEP_BOUND) -> RunResult:
    blocks = artifact.block_map()
    res = RunResult(env=env)
    bid: str | None = artifact.entry
    steps = 0
    while bid is not None:
        res.trace.append(bid)
        nxt: str | None = None
        jumped = False
        for ins in blocks[bid].instrs:
            steps += 1
            if steps > step_bound:
                res.status = "bound"
                return res
            if isinstance(ins, Assign):
                if ins.source is not None:
                    env[ins.target] = env[ins.source] + ins.offset
                else:
                    env[ins.target] = int(ins.value)
            elif isinstance(ins, Branch):
                if ins.cond.holds(env):
                    if ins.target is None:
                        return res
                    nxt, jumped = ins.target, True
                    break
            elif isinstance(ins, Guard):
                if ins.pred.matches(env):
                    res.guard_hits.append((bid, dict(env)))
                    nxt, jumped = ins.target, True
                    break
            elif isinstance(ins, ReadChannel):
                pol = artifact.channel(ins.channel).policy
                if pol is not None and pol.matches(env):
                    res.dropped = ins.channel
                    return res
            elif isinstance(ins, Sink):
                if ins.trigger.holds(env):
                    res.sink = ins.id
                    return res
        if not jumped:
            for e in artifact.out_edges(bid):
                if e.guard is None or e.guard.holds(env):
                    nxt = e.dst
                    break
        steps += 1
        if steps > step_bound:
            res.status = "bound"
            return res
        bid = nxt
    return res


@dataclass
class TraceResult:
    runs: list[RunResult]
    final_env: dict
    dropped: list[int]  # indices of dropped messages


def run_trace(artifact: ToyArtifact, trace: Mapping) -> TraceResult:
    """Replay a benign trace: a starting state plus a message sequence.

    Each message fixes the channel's FSM state variable to its ``fsm`` value
    before the run; the state then advances to ``next`` unless the message was
    dropped.
    """
    state = dict(trace.get("state", {}))
    runs, dropped = [], []
    env: dict = initial_env(artifact, {}, state)
    for i, msg in enumerate(trace.get("messages", [])):
        ch = artifact.channel(msg["channel"])
        if ch.state_var is not None and "fsm" in msg:
            state[ch.state_var] = msg["fsm"]
        env = initial_env(artifact, msg.get("fields", {}), state)
        r = run_env(artifact, env)
        runs.append(r)
        if r.dropped is not None:
            dropped.append(i)
        elif ch.state_var is not None and "next" in msg:
            state[ch.state_var] = msg["next"]
    final = dict(env)
    final.update(state)
    return TraceResult(runs, final, dropped)
