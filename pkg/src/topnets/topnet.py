"""TopNet layers, discrete and continuous-depth models.

One layer runs: message passing -> diagrams from learned (or fixed) filters on
the refined features -> vectorization -> topological aggregation into the
features (TOGL) and/or per-dimension graph embeddings (PersLay, RePHINE).
The readout concatenates pooled last-layer features with every layer's
per-dimension embeddings (ascending dim) and feeds a 2-layer MLP head.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .batch import ComplexBatch
from .complex import AttributedComplex, GeometricComplex, clique_lift
from .filtration import FilterFn, InvFeature
from .persistence.batched import LayerDiagrams, pd_for_layer, tie_margin
from .tnn import EMPSNLayer, GNNLayer, MPSNLayer
from .vectorize import PersLay, RephineVectorizer, ToglVectorizer, _onehot

TNN_KINDS = ("gin", "gcn", "mpsn", "empsn", "identity")
DIAGRAMS = ("vc", "isimplex", "geometric", "rephine", "none")
TOPAGGS = ("togl", "perslay", "rephine", "none")


@dataclass
class TopNetSpec:
    tnn: str = "gin"
    layers: int = 2
    hidden: int = 32
    encoder: str = "linear"
    diagram: str = "rephine"
    filtration: str = "learned"
    filtration_dim: int = 1
    inv: str = "max-pairwise-distance"
    num_filtrations: int = 8
    filter_hidden: int = 16
    ph_dim: int = 16
    pd_dims: list = field(default_factory=lambda: [0, 1])
    topagg: str = "rephine"
    perslay_weight: str = "one"
    perslay_phi: str = "mlp"
    perslay_agg: str = "sum"
    pool: str = "sum"
    readout_dims: str = "dim0"
    classes: int = 2
    task: str = "classify"
    lift: int | None = None
    max_dim: int | None = None
    neighborhoods: list | None = None
    msg: str = "mlp"
    update: str = "mlp"
    act: str = "relu"
    continuous: bool = False
    integrator: str = "euler"
    steps: int = 8

    def __post_init__(self):
        self.pd_dims = sorted(int(p) for p in self.pd_dims)
        self.validate()

    def validate(self):
        if self.tnn not in TNN_KINDS:
            raise ValueError(f"unknown tnn {self.tnn!r}")
        if self.diagram not in DIAGRAMS:
            raise ValueError(f"unknown diagram kind {self.diagram!r}")
        if self.topagg not in TOPAGGS:
            raise ValueError(f"unknown topagg {self.topagg!r}")
        if (self.diagram == "none") != (self.topagg == "none"):
            raise ValueError("diagram 'none' and topagg 'none' go together")
        if self.topagg == "rephine" and self.diagram != "rephine":
            raise ValueError("RePHINE aggregation needs RePHINE diagrams")
        if self.diagram == "rephine" and self.topagg != "rephine":
            raise ValueError("RePHINE diagrams are only consumed by the RePHINE aggregation")
        if self.encoder not in ("linear", "none"):
            raise ValueError(f"unknown encoder {self.encoder!r}")
        if self.encoder == "none" and self.tnn in ("mpsn", "empsn"):
            raise ValueError("simplicial layers need the linear encoder (uniform widths)")
        if self.continuous:
            if self.tnn not in ("mpsn", "empsn"):
                raise ValueError("continuous models need an mpsn or empsn vector field")
            if self.topagg == "togl":
                raise ValueError("continuous models keep diagrams out of the state; use rephine or perslay")
            if self.integrator not in ("euler", "rk4"):
                raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.task not in ("classify", "regress"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.filtration not in ("learned", "degree"):
            raise ValueError(f"unknown filtration {self.filtration!r}")

    @property
    def geometric(self) -> bool:
        return self.tnn == "empsn" or self.diagram == "geometric"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "TopNetSpec":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown model config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "TopNetSpec":
        return cls.from_dict(json.loads(text))


@dataclass
class LayerOutput:
    x: dict
    z: object
    r: dict
    m: list
    diagrams: LayerDiagrams | None = None


@dataclass
class Trajectory:
    xs: list
    zs: list
    times: np.ndarray
    ms: list

    def __len__(self):
        return len(self.xs)


class TopNet:
    def __init__(self, spec: TopNetSpec, in_width: int, seed: int = 0):
        self.spec = spec
        self.in_width = in_width
        self.store = store = ad.ParamStore(seed)
        s = spec
        self.k = 1 if s.filtration == "degree" else s.num_filtrations
        self.enc = ad.MLP(store, "enc", [in_width, s.hidden], act=s.act) if s.encoder == "linear" else None
        xw = s.hidden if (self.enc is not None or s.tnn in ("gin", "gcn") and s.layers > 0) else in_width
        self.xw = xw
        self.top = s.max_dim if s.max_dim is not None else (s.lift if s.lift is not None else 2)
        n_blocks = 1 if s.continuous else s.layers
        self.tnns, self.filters, self.vecs = [], [], []
        for l in range(n_blocks):
            p = f"L{l}"
            self.tnns.append(self._tnn(p, l))
            self.filters.append(self._filters(p))
            self.vecs.append(self._vectorizer(p))
        mw = self._m_width()
        n_m = (s.layers if not s.continuous else 2)
        rw = xw * (1 + (self.top if s.readout_dims == "all" else 0)) + mw * n_m
        out = s.classes if s.task == "classify" else 1
        self.head = ad.MLP(store, "head", [rw, s.hidden, out], act=s.act)
        self._trace = None

    def tie_margin(self, batch: ComplexBatch) -> float:
        """Smallest within-graph gap of filter values over every diagram computed in a forward pass.

        Fixed filters have no parameters, so their ties cannot create kinks; they report ``inf``.
        """
        if self.spec.diagram == "none" or self.spec.filtration == "degree":
            return np.inf
        self._trace = []
        try:
            self.forward(batch)
            return min((tie_margin(ld, batch) for ld in self._trace), default=np.inf)
        finally:
            self._trace = None

    # -- construction ---------------------------------------------------------
    def _tnn(self, p, l):
        s = self.spec
        if s.tnn == "identity":
            return None
        if s.tnn in ("gin", "gcn"):
            in_w = s.hidden if (self.enc is not None or l > 0) else self.in_width
            return GNNLayer(self.store, p + ".gnn", in_w, s.hidden, kind=s.tnn, act=s.act)
        if s.tnn == "mpsn":
            return MPSNLayer(self.store, p + ".mpsn", s.hidden, self.top, neighborhoods=s.neighborhoods,
                             msg=s.msg, update=s.update, act=s.act)
        return EMPSNLayer(self.store, p + ".empsn", s.hidden, self.top, neighborhoods=s.neighborhoods,
                          update=s.update, act=s.act)

    def _filters(self, p):
        s = self.spec
        if s.diagram == "none":
            return {}
        if s.filtration == "degree":
            return {"f": FilterFn.degree(), "f_v": FilterFn.degree(), "f_e": FilterFn.degree()}
        in_w = self.xw + (1 if s.diagram == "geometric" else 0)
        mk = lambda name, w: FilterFn.learned(self.store, f"{p}.{name}", w, s.filter_hidden, self.k, act=s.act)
        if s.diagram == "rephine":
            return {"f_v": mk("fv", self.xw), "f_e": mk("fe", self.xw)}
        return {"f": mk("f", in_w)}

    def _vectorizer(self, p):
        s = self.spec
        if s.topagg == "togl":
            return ToglVectorizer(self.store, p + ".togl", k=self.k, hidden=s.ph_dim, out=self.xw, act=s.act)
        if s.topagg == "perslay":
            return {i: PersLay(self.store, f"{p}.perslay{i}", weight=s.perslay_weight, phi=s.perslay_phi,
                               agg=s.perslay_agg, in_width=2 + self.k, hidden=s.ph_dim, out=s.ph_dim, act=s.act)
                    for i in s.pd_dims}
        if s.topagg == "rephine":
            return RephineVectorizer(self.store, p + ".rephine", k=self.k, hidden=s.ph_dim, out=s.ph_dim, act=s.act)
        return None

    def _m_width(self):
        s = self.spec
        if s.topagg == "togl":
            return self.xw if 1 in s.pd_dims else 0
        if s.topagg == "perslay":
            return sum(v.out_width for v in self.vecs[0].values()) if self.vecs else 0
        if s.topagg == "rephine":
            return s.ph_dim * (2 if 1 in s.pd_dims else 1)
        return 0

    # -- data ---------------------------------------------------------------
    def prepare(self, items) -> ComplexBatch:
        s = self.spec
        if s.lift is not None:
            items = [_lift(it, s.lift) for it in items]
        return ComplexBatch(items, max_dim=self.top)

    def encode(self, batch: ComplexBatch):
        if 0 not in batch.colors:
            raise ValueError("batch has no vertex colors")
        x0 = batch.colors[0]
        if x0.shape[1] != self.in_width:
            raise ValueError(f"feature width {x0.shape[1]} does not match model input width {self.in_width}")
        h = self.enc(x0) if self.enc is not None else ad.Tensor(x0)
        x = lift_features(batch, h)
        z = None
        if self.spec.geometric:
            if batch.coords is None:
                raise ValueError("geometric model needs vertex coordinates")
            z = ad.Tensor(batch.coords)
        return x, z

    # -- one layer ----------------------------------------------------------
    def refine(self, l, batch, x, z):
        tnn = self.tnns[l]
        if tnn is None:
            return dict(x), z
        out, z2 = tnn(batch, x, z)
        if isinstance(tnn, GNNLayer):
            out = lift_features(batch, out[0])
        return out, z2

    def diagrams(self, l, batch, x, z) -> LayerDiagrams | None:
        s = self.spec
        if s.diagram == "none":
            return None
        f = self.filters[l]
        inv = InvFeature(s.inv, s.filtration_dim) if s.diagram == "geometric" else None
        ld = pd_for_layer(batch, s.diagram, x=x, z=z, f=f.get("f"), f_v=f.get("f_v"), f_e=f.get("f_e"),
                          i=s.filtration_dim, inv=inv, pd_dims=s.pd_dims)
        if self._trace is not None:
            self._trace.append(ld)
        return ld

    def embed(self, l, batch, ld: LayerDiagrams | None):
        """Topological vectors: ``(r per dim, [m^{l,i} ...] in ascending dim)``."""
        s = self.spec
        G = batch.size
        vec = self.vecs[l]
        if ld is None:
            return {}, []
        if s.topagg == "togl":
            r = {0: vec.vertex(ld)}
            m = [vec.graph(ld.dims.get(1), G)] if 1 in s.pd_dims else []
            return r, m
        if s.topagg == "perslay":
            m = []
            for i in s.pd_dims:
                ps = ld.dim0() if i == 0 else ld.dims.get(i)
                if ps is None or len(ps) == 0:
                    m.append(ad.Tensor(np.zeros((G, vec[i].out_width))))
                else:
                    pts = ad.concat([ps.points(), _onehot(ps.filt, ld.k)], axis=1)
                    m.append(vec[i](pts, ps.graph, G))
            return {}, m
        m0, m1 = vec.parts(ld, G)
        return {}, ([m0, m1] if 1 in s.pd_dims else [m0])

    def topnet_layer(self, l, batch, x, z) -> LayerOutput:
        xt, z2 = self.refine(l, batch, x, z)
        ld = self.diagrams(l, batch, xt, z2)
        r, m = self.embed(l, batch, ld)
        if self.spec.topagg == "togl":
            xt = dict(xt)
            xt[0] = xt[0] + r[0]
        return LayerOutput(xt, z2, r, m, ld)

    # -- readout ------------------------------------------------------------
    def pooled(self, batch, x):
        s = self.spec
        dims = [0] + (list(range(1, self.top + 1)) if s.readout_dims == "all" else [])
        out = []
        for d in dims:
            if d in x and batch.count(d):
                out.append(ad.pool(x[d], batch.graph[d], batch.size, s.pool))
            else:
                out.append(ad.Tensor(np.zeros((batch.size, self.xw))))
        return out

    def readout(self, batch, x, ms) -> ad.Tensor:
        feats = self.pooled(batch, x) + [m for layer in ms for m in layer]
        return self.head(ad.concat(feats, axis=1))

    # -- full models ----------------------------------------------------------
    def forward(self, batch: ComplexBatch) -> ad.Tensor:
        if self.spec.continuous:
            return self.forward_continuous(batch)
        return self.forward_discrete(batch)

    __call__ = forward

    def forward_discrete(self, batch: ComplexBatch) -> ad.Tensor:
        x, z = self.encode(batch)
        ms = []
        for l in range(self.spec.layers):
            out = self.topnet_layer(l, batch, x, z)
            x, z = out.x, out.z
            ms.append(out.m)
        return self.readout(batch, x, ms)

    # continuous depth
    def vector_field(self, batch, x, z):
        """``(dx, dz)``: one message pass with shared parameters; ``dz`` lives on vertices only."""
        tnn = self.tnns[0]
        if isinstance(tnn, EMPSNLayer):
            out, dz = tnn.step(batch, x, z)
        else:
            out, _ = tnn(batch, x, z)
            dz = None if z is None else ad.Tensor(np.zeros(z.shape))
        dx = {d: out.get(d, ad.Tensor(np.zeros(x[d].shape))) for d in x}
        return dx, dz

    def top_embedding(self, batch, x, z) -> list:
        ld = self.diagrams(0, batch, x, z)
        return self.embed(0, batch, ld)[1]

    def integrate(self, batch, N: int, integrator: str | None = None, with_ph: bool = True, field=None) -> Trajectory:
        if N < 1:
            raise ValueError("need at least one step")
        integrator = integrator or self.spec.integrator
        field = field or (lambda x, z: self.vector_field(batch, x, z))
        x, z = self.encode(batch)
        h = 1.0 / N
        xs, zs = [x], [z]
        ms = [self.top_embedding(batch, x, z)] if with_ph else []
        for step in range(N):
            if integrator == "euler":
                dx, dz = field(x, z)
                x = {d: x[d] + dx[d] * h for d in x}
                z = None if z is None else z + dz * h
            elif integrator == "rk4":
                x, z = _rk4(field, x, z, h)
            else:
                raise ValueError(f"unknown integrator {integrator!r}")
            _check_finite(x, z, step + 1)
            xs.append(x)
            zs.append(z)
            if with_ph:
                ms.append(self.top_embedding(batch, x, z))
        return Trajectory(xs, zs, np.arange(N + 1) * h, ms)

    def forward_continuous(self, batch, N: int | None = None, integrator: str | None = None) -> ad.Tensor:
        traj = self.integrate(batch, N or self.spec.steps, integrator)
        final = traj.ms[-1]
        avg = [_mean_tensors([ms[j] for ms in traj.ms]) for j in range(len(final))]
        return self.readout(batch, traj.xs[-1], [final, avg])

    def residual_states(self, batch, N: int):
        """Depth-``N`` discrete residual network ``x <- x + (1/N) F(x)`` sharing the field's parameters."""
        x, z = self.encode(batch)
        for _ in range(N):
            dx, dz = self.vector_field(batch, x, z)
            x = {d: x[d] + (1.0 / N) * dx[d] for d in x}
            if z is not None:
                z = z + (1.0 / N) * dz
        return x, z

    # -- losses -------------------------------------------------------------
    def loss(self, batch, y):
        out = self.forward(batch)
        if self.spec.task == "classify":
            return ad.cross_entropy(out, y), out
        return ad.l1_loss(out.reshape((-1,)), y), out


def lift_features(batch: ComplexBatch, h0) -> dict:
    """Vertex features plus higher-dim features as the sum over each simplex's vertices."""
    h0 = ad.as_tensor(h0)
    x = {0: h0}
    for d in range(1, batch.dim + 1):
        cells = batch.cells[d]
        acc = h0[cells[:, 0]]
        for j in range(1, d + 1):
            acc = acc + h0[cells[:, j]]
        x[d] = acc
    return x


def _lift(item, max_dim):
    if isinstance(item, GeometricComplex):
        K = item.complex
        if K.dim <= 1:
            return GeometricComplex(AttributedComplex(clique_lift(K, max_dim), {0: item.colors[0]}), item.coords)
        return item
    if isinstance(item, AttributedComplex):
        if item.complex.dim <= 1:
            return AttributedComplex(clique_lift(item.complex, max_dim), {0: item.colors[0]})
        return item
    return clique_lift(item, max_dim) if item.dim <= 1 else item


def _axpy(x, z, k, a):
    xn = {d: x[d] + k[0][d] * a for d in x}
    zn = None if z is None else z + k[1] * a
    return xn, zn


def _rk4(field, x, z, h):
    k1 = field(x, z)
    k2 = field(*_axpy(x, z, k1, h / 2))
    k3 = field(*_axpy(x, z, k2, h / 2))
    k4 = field(*_axpy(x, z, k3, h))
    xn = {d: x[d] + (k1[0][d] + k2[0][d] * 2.0 + k3[0][d] * 2.0 + k4[0][d]) * (h / 6) for d in x}
    zn = None
    if z is not None:
        zn = z + (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * (h / 6)
    return xn, zn


def _check_finite(x, z, step):
    bad = any(not np.all(np.isfinite(t.data)) for t in x.values())
    if z is not None and not np.all(np.isfinite(ad.as_tensor(z).data)):
        bad = True
    if bad:
        raise FloatingPointError(f"non-finite state at integration step {step}")


def _mean_tensors(ts):
    acc = ts[0]
    for t in ts[1:]:
        acc = acc + t
    return acc * (1.0 / len(ts))


# -- discretization error -----------------------------------------------------
def _flat(x: dict) -> np.ndarray:
    return np.concatenate([x[d].data.ravel() for d in sorted(x)])


def discretization_error_experiment(model: TopNet, batch: ComplexBatch, N_list=(8, 16, 32, 64),
                                    ref_factor: int = 64, field=None) -> dict:
    """Euler vs an RK4 reference at ``ref_factor * max(N)`` steps.

    Rows carry ``e_v`` (L1 gap of all simplex features at t=1), ``e_r`` (L1 gap
    of the topological embeddings computed from the t=1 state) and the ratio
    ``e_v(N) / e_v(previous N)``. ``ref_check`` is the relative change of the
    smallest-N ``e_v`` when the reference step is halved.
    """
    N_list = sorted(N_list)
    n_ref = ref_factor * max(N_list)

    def final(N, integ):
        tr = model.integrate(batch, N, integ, with_ph=False, field=field)
        x, z = tr.xs[-1], tr.zs[-1]
        topo = model.top_embedding(batch, x, z) if model.spec.diagram != "none" else []
        r = np.concatenate([m.data.ravel() for m in topo]) if topo else np.zeros(0)
        return _flat(x), r

    xr, rr = final(n_ref, "rk4")
    rows, prev = [], None
    for N in N_list:
        xe, re = final(N, "euler")
        e_v = float(np.abs(xr - xe).sum())
        e_r = float(np.abs(rr - re).sum())
        rows.append({"N": N, "e_v": e_v, "e_r": e_r, "ratio": (e_v / prev if prev else None)})
        prev = e_v
    xr2, _ = final(2 * n_ref, "rk4")
    xe, _ = final(N_list[0], "euler")
    e2 = float(np.abs(xr2 - xe).sum())
    e1 = rows[0]["e_v"]
    ref_check = abs(e2 - e1) / e1 if e1 > 0 else 0.0
    return {"rows": rows, "n_ref": n_ref, "ref_check": ref_check}
