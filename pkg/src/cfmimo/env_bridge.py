"""Multi-agent environment bridge.

Exposes the loop engine to an external policy process over a JSON-lines
protocol (one object per line, complex numbers as [re, im] pairs,
matrices row-major, observation members in I_k order with k first):

  hello:  {type, scenario: {K, Nr, Ns, I_card, N_nRT}}
  reset:  {type, seed}
  obs:    {type, n, agents: [{k, xi: [[re, im], ...]}]}
  act:    {type, n, agents: [{k, tril_L: [...], U: [[re, im], ...]}]}
  reward: {type, n, agents: [{k, r}]}
  error:  {type, n, reason}
  bye:    {type}

Per episode the exchange is reset -> (obs -> act -> reward) x N_nRT ->
obs(terminal). A malformed or out-of-order act gets an error reply and
the expert substitutes for that loop; a connection drop shuts the server
down cleanly with partial logs flushed.
"""

import json

import numpy as np

from .errors import ProtocolError
from .precoder import FilterWeightSet


def _pairs(mat) -> list:
    """Row-major [re, im] pairs."""
    flat = np.asarray(mat).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in flat]


def _unpairs(pairs, rows, cols, what) -> np.ndarray:
    if not isinstance(pairs, list) or len(pairs) != rows * cols:
        raise ProtocolError(f"{what} must hold {rows * cols} [re, im] pairs")
    out = np.empty(rows * cols, dtype=np.complex128)
    for idx, pair in enumerate(pairs):
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ProtocolError(f"{what}[{idx}] is not an [re, im] pair")
        re, im = pair
        if not (isinstance(re, (int, float)) and isinstance(im, (int, float))):
            raise ProtocolError(f"{what}[{idx}] has non-numeric entries")
        out[idx] = complex(re, im)
    if not np.isfinite(out).all():
        raise ProtocolError(f"{what} has non-finite entries")
    return out.reshape(rows, cols)


def encode_obs(k: int, xi_set, similar) -> list:
    """Observation payload for agent k: Xi_{k,i} over I_k, k first."""
    out = []
    for i in similar[k]:
        out.extend(_pairs(xi_set.xi[k, i]))
    return out


def encode_act(l_chol, u) -> dict:
    """Action payload: Ns real diagonal entries of L, then the strictly
    lower triangle row-major as re, im floats, then U as pairs."""
    l_chol = np.asarray(l_chol)
    ns = l_chol.shape[0]
    tril = [float(l_chol[i, i].real) for i in range(ns)]
    for r in range(1, ns):
        for c in range(r):
            tril.append(float(l_chol[r, c].real))
            tril.append(float(l_chol[r, c].imag))
    return {"tril_L": tril, "U": _pairs(u)}


def decode_act(payload: dict, nr: int, ns: int):
    """Rebuild (L_k, U_k, W_k = L L^H) from an action payload.

    Raises ProtocolError on wrong lengths, non-finite values, or a
    diagonal that is not strictly positive.
    """
    if not isinstance(payload, dict):
        raise ProtocolError("action payload must be an object")
    tril = payload.get("tril_L")
    if not isinstance(tril, list) or len(tril) != ns * ns:
        raise ProtocolError(f"tril_L must hold {ns * ns} reals")
    if not all(isinstance(x, (int, float)) for x in tril):
        raise ProtocolError("tril_L has non-numeric entries")
    if not np.isfinite(tril).all():
        raise ProtocolError("tril_L has non-finite entries")
    l_mat = np.zeros((ns, ns), dtype=np.complex128)
    for i in range(ns):
        if tril[i] <= 0.0:
            raise ProtocolError(f"tril_L diagonal entry {i} must be > 0")
        l_mat[i, i] = tril[i]
    pos = ns
    for r in range(1, ns):
        for c in range(r):
            l_mat[r, c] = complex(tril[pos], tril[pos + 1])
            pos += 2
    u = _unpairs(payload.get("U"), nr, ns, "U")
    w = l_mat @ l_mat.conj().T
    return l_mat, u, w


def obs_length(nr: int, ns: int, i_card: int) -> int:
    """Observation payload length in reals."""
    return 2 * i_card * nr * ns


def act_length(nr: int, ns: int) -> int:
    """Action payload length in reals."""
    return ns * ns + 2 * nr * ns


class _Disconnect(Exception):
    pass


class BridgeServer:
    """Synchronous single-connection server driving one episode per reset."""

    def __init__(self, sc, rfile, wfile, experience_path=None):
        self.sc = sc
        self.rfile = rfile
        self.wfile = wfile
        self.experience_path = experience_path
        self.episodes_served = 0

    # -- wire helpers ---------------------------------------------------

    def _send(self, obj) -> None:
        line = json.dumps(obj, separators=(",", ":")) + "\n"
        self.wfile.write(line)
        self.wfile.flush()

    def _recv(self) -> dict:
        try:
            line = self.rfile.readline()
        except UnicodeDecodeError as exc:
            raise ProtocolError(f"undecodable bytes: {exc}") from exc
        if not line:
            raise _Disconnect
        if isinstance(line, bytes):
            line = line.decode("utf-8", errors="replace")
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"invalid JSON: {exc}") from exc
        if not isinstance(msg, dict) or "type" not in msg:
            raise ProtocolError("message must be an object with a 'type'")
        return msg

    def _error(self, n, reason) -> None:
        self._send({"type": "error", "n": n, "reason": str(reason)})

    # -- episode plumbing -------------------------------------------------

    def _obs_message(self, n, sim) -> None:
        _, obs = sim._gather_obs()
        self._send(
            {"type": "obs", "n": n, "agents": [{"k": k, "xi": obs[k]} for k in range(self.sc.K)]}
        )

    def _reward_message(self, n, reward) -> None:
        self._send(
            {
                "type": "reward",
                "n": n,
                "agents": [{"k": k, "r": float(reward[k])} for k in range(len(reward))],
            }
        )

    def _act_fn(self, n, xi_set, reward_prev, sim):
        from . import orchestrator  # local import to avoid a module cycle

        if reward_prev is not None:
            self._reward_message(n - 1, reward_prev)
        obs = [encode_obs(k, xi_set, sim.state.similar) for k in range(self.sc.K)]
        self._send(
            {"type": "obs", "n": n, "agents": [{"k": k, "xi": obs[k]} for k in range(self.sc.K)]}
        )
        try:
            msg = self._recv()
            if msg.get("type") != "act":
                raise ProtocolError(f"expected act, got {msg.get('type')!r}")
            if msg.get("n") != n:
                raise ProtocolError(f"act answers n={msg.get('n')}, expected {n}")
            agents = msg.get("agents")
            if not isinstance(agents, list) or len(agents) != self.sc.K:
                raise ProtocolError(f"act must carry {self.sc.K} agents")
            K, Nr, Ns = self.sc.K, self.sc.Nr, self.sc.Ns
            U = np.empty((K, Nr, Ns), dtype=np.complex128)
            W = np.empty((K, Ns, Ns), dtype=np.complex128)
            Lc = np.empty((K, Ns, Ns), dtype=np.complex128)
            seen = set()
            for entry in agents:
                if not isinstance(entry, dict) or "k" not in entry:
                    raise ProtocolError("agent entry must carry k")
                k = entry["k"]
                if not isinstance(k, int) or not 0 <= k < K or k in seen:
                    raise ProtocolError(f"bad agent index {k!r}")
                seen.add(k)
                l_mat, u, w = decode_act(entry, Nr, Ns)
                Lc[k], U[k], W[k] = l_mat, u, w
            return FilterWeightSet(U=U, W=W, L_chol=Lc)
        except ProtocolError as exc:
            self._error(n, exc)
            return None

    def _end_fn(self, n, xi_set, reward_prev, sim):
        if reward_prev is not None:
            self._reward_message(n - 1, reward_prev)
        obs = [encode_obs(k, xi_set, sim.state.similar) for k in range(self.sc.K)]
        self._send(
            {"type": "obs", "n": n, "agents": [{"k": k, "xi": obs[k]} for k in range(self.sc.K)]}
        )

    def _flush_experience(self, sim) -> None:
        if self.experience_path is None:
            return
        with open(self.experience_path, "a") as fh:
            for tr in sim.transitions:
                fh.write(
                    json.dumps(
                        {
                            "n": tr.n,
                            "k": tr.k,
                            "obs": tr.obs,
                            "act": tr.act,
                            "reward": tr.reward,
                            "next_obs": tr.next_obs,
                        },
                        separators=(",", ":"),
                    )
                    + "\n"
                )

    def _run_episode(self, seed) -> None:
        from . import orchestrator
        from .providers import ExternalProvider

        sim = orchestrator.Simulation(
            self.sc.with_updates(seed=int(seed)),
            mode="agent",
            provider=ExternalProvider(self._act_fn, self._end_fn),
        )
        try:
            sim.run_episode()
            self.episodes_served += 1
        finally:
            self._flush_experience(sim)

    def run(self) -> None:
        """Serve until bye or disconnect."""
        self._send(
            {
                "type": "hello",
                "scenario": {
                    "K": self.sc.K,
                    "Nr": self.sc.Nr,
                    "Ns": self.sc.Ns,
                    "I_card": self.sc.I_card,
                    "N_nRT": self.sc.N_nRT,
                },
            }
        )
        while True:
            try:
                msg = self._recv()
            except _Disconnect:
                return
            except ProtocolError as exc:
                self._error(-1, exc)
                continue
            mtype = msg.get("type")
            if mtype == "bye":
                self._send({"type": "bye"})
                return
            if mtype != "reset":
                self._error(-1, f"expected reset or bye, got {mtype!r}")
                continue
            seed = msg.get("seed")
            if not isinstance(seed, int):
                self._error(-1, "reset needs an integer seed")
                continue
            try:
                self._run_episode(seed)
            except _Disconnect:
                return


def serve(sc, rfile, wfile, experience_path=None) -> BridgeServer:
    server = BridgeServer(sc, rfile, wfile, experience_path)
    server.run()
    return server
