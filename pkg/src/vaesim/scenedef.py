"""Scene description files: parsing, validation and serialization.

A scene is an XML element tree::

    <scene name="room" c="340" blocksize="1024" image_order="1">
      <source name="talker" file="speech.wav" loop="true" f6db="1000">
        <position>0 1 0 1.6
                  10 3 0 1.6</position>          <!-- t x y z, per line -->
        <orientation>0 90 0 0</orientation>    <!-- t z y x, degrees -->
      </source>
      <diffuse name="babble" file="babble_foa.wav" size="8 6 3" ramp="0.5"/>
      <face name="floor" vertices="0 0 0  8 0 0  8 6 0  0 6 0" rho="0.9" delta="0.2"/>
      <face name="wall" vertices="...">
        <material>125 0.02
                  1000 0.05</material>          <!-- frequency absorption -->
      </face>
      <obstacle name="screen" vertices="..." attenuation="0.1"/>
      <receiver name="ring" type="hoa2d" order="3" decoder="maxre">
        <speaker az="0"/> <speaker az="45"/> ...
      </receiver>
    </scene>

Receiver types: ``omni`` (virtual microphone, attribute ``a``), ``nsp``,
``vbap``, ``hoa2d``, ``fuma`` (``order``, ``dims``) and ``binaural``
(``inner`` speaker type plus ``hrirs`` manifest).  See ``docs/scene-format.md``
for the grammar and :data:`DEFAULTS` for default values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from xml.parsers import expat
from xml.sax.saxutils import quoteattr

import numpy as np

from .engine import DiffuseSource, RangeBox, Receiver, Scene, SceneParams, Source
from .geometry import CARTESIAN, SPHERICAL, Trajectory
from .imagesource import DEFAULT_KAPPA, Reflector, fit_reflection_coeffs
from .polygon import PLANARITY_TOL, planarity_residual
from .receivers import HOA2D, NSP, VBAP2D, AmbiFuma, Binaural, SpeakerLayout, VirtualMic, load_hrir_set
from .transmission import Obstacle

#: Default values applied when an attribute is absent.
DEFAULTS = {
    "fs": 44100.0,
    "c": 340.0,
    "blocksize": 1024,
    "image_order": 1,
    "kappa": DEFAULT_KAPPA,
    "r_min": 0.1,
    "air_constant": 7782.0,
    "max_distance": 1000.0,
    "interpolation": "nearest",
    "retarded": True,
    "rho": 1.0,
    "delta": 0.0,
    "attenuation": 0.0,
    "gain": 1.0,
    "loop": False,
    "a": 0.0,
    "order": 1,
    "decoder": "maxre",
    "ramp": 0.0,
}

REMEDIES = {
    "SYNTAX": "fix the XML syntax at the reported position",
    "UNKNOWN_ELEMENT": "remove the element or check its spelling",
    "UNKNOWN_ATTR": "remove the attribute or check its spelling",
    "MISSING_ATTR": "add the required attribute",
    "BAD_VALUE": "use a value of the documented type and range",
    "DUP_NAME": "give every object a unique name",
    "NONPLANAR": "move the vertices onto one plane (tolerance 1e-6 m)",
    "FORMAT_LAYOUT": "match the speaker layout to the receiver type",
    "HOA_ORDER": "lower the HOA order or add speakers (need N >= 2M+1)",
    "HRIR_LOAD": "check the HRIR manifest path and its audio files",
    "NO_SOURCES": "add a source or diffuse element",
    "NO_RECEIVERS": "add a receiver element",
    "IRREGULAR_RING": "space the speakers evenly in azimuth or use another receiver type",
    "RAMP_TOO_LARGE": "use a ramp of at most half the smallest box dimension",
    "TRAJ_PAST_END": "extend the render duration or shorten the trajectory",
}

ELEMENTS = {
    "scene": {"name", "fs", "c", "blocksize", "image_order", "r_min", "air_constant",
              "max_distance", "interpolation", "retarded"},
    "source": {"name", "file", "loop", "gain", "f6db"},
    "diffuse": {"name", "file", "loop", "gain", "size", "ramp"},
    "face": {"name", "vertices", "rho", "delta", "kappa"},
    "obstacle": {"name", "vertices", "attenuation"},
    "receiver": {"name", "type", "a", "order", "decoder", "dims", "inner", "hrirs"},
    "speaker": {"az", "el", "r"},
    "position": {"interp"},
    "orientation": set(),
    "material": set(),
}
CHILDREN = {
    "scene": {"source", "diffuse", "face", "obstacle", "receiver"},
    "source": {"position", "orientation"},
    "diffuse": {"position", "orientation"},
    "face": {"material"},
    "obstacle": set(),
    "receiver": {"position", "orientation", "speaker"},
    "speaker": set(),
    "position": set(),
    "orientation": set(),
    "material": set(),
}
SPEAKER_TYPES = {"nsp", "vbap", "hoa2d"}
RECEIVER_TYPES = SPEAKER_TYPES | {"omni", "fuma", "binaural"}


@dataclass
class Diagnostic:
    code: str
    message: str
    line: int | None = None
    column: int | None = None
    severity: str = "error"
    related: list[tuple[int, int]] = field(default_factory=list)

    @property
    def remedy(self) -> str:
        return REMEDIES.get(self.code, "")

    def __str__(self) -> str:
        loc = f"{self.line}:{self.column}: " if self.line is not None else ""
        extra = "".join(f" (also {ln}:{col})" for ln, col in self.related)
        return f"{loc}{self.severity} {self.code}: {self.message}{extra}; {self.remedy}"

    def as_dict(self) -> dict:
        return {"code": self.code, "severity": self.severity, "message": self.message,
                "line": self.line, "column": self.column, "related": self.related, "remedy": self.remedy}


class SceneError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


class _Node:
    __slots__ = ("tag", "attrib", "text", "children", "line", "column")

    def __init__(self, tag, attrib, line, column):
        self.tag = tag
        self.attrib = attrib
        self.text = ""
        self.children = []
        self.line = line
        self.column = column


def _build_tree(text: str) -> _Node:
    parser = expat.ParserCreate()
    stack: list[_Node] = []
    root: list[_Node] = []

    def start(tag, attrib):
        node = _Node(tag, attrib, parser.CurrentLineNumber, parser.CurrentColumnNumber + 1)
        (stack[-1].children if stack else root).append(node)
        stack.append(node)

    def end(tag):
        stack.pop()

    def chars(data):
        if stack:
            stack[-1].text += data

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    parser.Parse(text.encode("utf-8") if isinstance(text, str) else text, True)
    return root[0]


class _Reader:
    """Walks the element tree, collecting diagnostics instead of stopping
    at the first problem."""

    def __init__(self, base_dir):
        self.base_dir = Path(base_dir) if base_dir is not None else None
        self.diags: list[Diagnostic] = []
        self.names: dict[str, tuple[int, int]] = {}

    def error(self, code, msg, node=None, severity="error", related=None):
        self.diags.append(Diagnostic(code, msg, node.line if node else None, node.column if node else None,
                                     severity, related or []))

    def _num(self, node, key, default=None, cast=float, required=False, check=None, what=""):
        raw = node.attrib.get(key)
        if raw is None:
            if required:
                self.error("MISSING_ATTR", f"<{node.tag}> needs attribute {key!r}", node)
            return default
        try:
            value = cast(raw)
        except ValueError:
            self.error("BAD_VALUE", f"{key}={raw!r} is not a valid {cast.__name__}", node)
            return default
        if check is not None and not check(value):
            self.error("BAD_VALUE", f"{key}={raw!r}: {what}", node)
            return default
        return value

    def _bool(self, node, key, default):
        raw = node.attrib.get(key)
        if raw is None:
            return default
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        self.error("BAD_VALUE", f"{key}={raw!r} is not a boolean", node)
        return default

    def _floats(self, node, text, width):
        try:
            values = [float(v) for v in text.split()]
        except ValueError:
            self.error("BAD_VALUE", f"<{node.tag}> contains non-numeric values", node)
            return None
        if not values or len(values) % width:
            self.error("BAD_VALUE", f"<{node.tag}> needs groups of {width} numbers", node)
            return None
        return np.array(values).reshape(-1, width)

    def check_structure(self, node):
        allowed = ELEMENTS[node.tag]
        for key in node.attrib:
            if key not in allowed:
                self.error("UNKNOWN_ATTR", f"<{node.tag}> has unknown attribute {key!r}", node)
        for child in node.children:
            if child.tag not in CHILDREN[node.tag]:
                self.error("UNKNOWN_ELEMENT", f"<{child.tag}> is not allowed inside <{node.tag}>", child)
            else:
                self.check_structure(child)

    def name(self, node, kind):
        name = node.attrib.get("name")
        if not name:
            self.error("MISSING_ATTR", f"<{kind}> needs a name", node)
            return f"{kind}{len(self.names)}"
        if name in self.names:
            self.error("DUP_NAME", f"name {name!r} used more than once", node, related=[self.names[name]])
        else:
            self.names[name] = (node.line, node.column)
        return name

    def trajectory(self, node) -> Trajectory:
        pos = [c for c in node.children if c.tag == "position"]
        rot = [c for c in node.children if c.tag == "orientation"]
        for extra in pos[1:] + rot[1:]:
            self.error("UNKNOWN_ELEMENT", f"duplicate <{extra.tag}>", extra)
        pos_samples, rot_samples, mode = None, None, CARTESIAN
        if pos:
            mode = pos[0].attrib.get("interp", CARTESIAN)
            if mode not in (CARTESIAN, SPHERICAL):
                self.error("BAD_VALUE", f"interp={mode!r} must be cartesian or spherical", pos[0])
                mode = CARTESIAN
            pos_samples = self._samples(pos[0])
        if rot:
            rot_samples = self._samples(rot[0])
            if rot_samples is not None:
                rot_samples = [(t, np.deg2rad(v)) for t, v in rot_samples]
        try:
            return Trajectory(pos_samples, rot_samples, mode)
        except ValueError as exc:
            self.error("BAD_VALUE", str(exc), node)
            return Trajectory()

    def _samples(self, node):
        text = node.text.strip()
        if not text:
            return None
        rows = self._floats(node, text, 4)
        if rows is None:
            return None
        if len({r[0] for r in rows}) != len(rows):
            self.error("BAD_VALUE", "trajectory sample times must be distinct", node)
            return None
        return [(r[0], r[1:]) for r in rows]

    def vertices(self, node):
        raw = node.attrib.get("vertices")
        if raw is None:
            self.error("MISSING_ATTR", f"<{node.tag}> needs 'vertices'", node)
            return None
        v = self._floats(node, raw, 3)
        if v is None:
            return None
        if len(v) < 3:
            self.error("BAD_VALUE", "a polygon needs at least three vertices", node)
            return None
        residual = planarity_residual(v)
        if residual > PLANARITY_TOL:
            self.error("NONPLANAR", f"vertices deviate {residual:.3g} m from a plane", node)
            return None
        return v

    def resolve(self, path):
        p = Path(path)
        if self.base_dir is not None and not p.is_absolute():
            return str(self.base_dir / p)
        return str(p)


def _params(r: _Reader, node) -> SceneParams:
    positive = dict(check=lambda v: v > 0, what="must be positive")
    interp = node.attrib.get("interpolation", DEFAULTS["interpolation"])
    if interp not in ("nearest", "sinc"):
        r.error("BAD_VALUE", f"interpolation={interp!r} must be nearest or sinc", node)
        interp = DEFAULTS["interpolation"]
    return SceneParams(
        fs=r._num(node, "fs", DEFAULTS["fs"], **positive),
        c=r._num(node, "c", DEFAULTS["c"], **positive),
        block_size=r._num(node, "blocksize", DEFAULTS["blocksize"], int, **positive),
        image_order=r._num(node, "image_order", DEFAULTS["image_order"], int,
                           check=lambda v: v >= 0, what="must be >= 0"),
        r_min=r._num(node, "r_min", DEFAULTS["r_min"], **positive),
        air_constant=r._num(node, "air_constant", DEFAULTS["air_constant"], **positive),
        max_distance=r._num(node, "max_distance", DEFAULTS["max_distance"], **positive),
        interpolation=interp,
        retarded_time=r._bool(node, "retarded", DEFAULTS["retarded"]),
    )


def _source(r: _Reader, node) -> Source:
    f6db = r._num(node, "f6db", None, check=lambda v: v > 0, what="must be positive")
    return Source(
        name=r.name(node, "source"),
        trajectory=r.trajectory(node),
        audio=r.resolve(node.attrib["file"]) if "file" in node.attrib else None,
        gain=r._num(node, "gain", DEFAULTS["gain"]),
        loop=r._bool(node, "loop", DEFAULTS["loop"]),
        f6db=f6db,
    )


def _diffuse(r: _Reader, node) -> DiffuseSource | None:
    name = r.name(node, "diffuse")
    size = (10.0, 10.0, 10.0)
    if "size" in node.attrib:
        s = r._floats(node, node.attrib["size"], 3)
        if s is not None and np.all(s > 0):
            size = tuple(s[0])
        elif s is not None:
            r.error("BAD_VALUE", "range box dimensions must be positive", node)
    ramp = r._num(node, "ramp", DEFAULTS["ramp"], check=lambda v: v >= 0, what="must be >= 0")
    return DiffuseSource(
        name=name,
        box=RangeBox(r.trajectory(node), size, ramp),
        audio=r.resolve(node.attrib["file"]) if "file" in node.attrib else None,
        gain=r._num(node, "gain", DEFAULTS["gain"]),
        loop=r._bool(node, "loop", DEFAULTS["loop"]),
    )


def _face(r: _Reader, node, fs: float) -> Reflector | None:
    name = r.name(node, "face")
    v = r.vertices(node)
    rho = r._num(node, "rho", DEFAULTS["rho"], check=lambda x: 0 <= x <= 1, what="must lie in [0, 1]")
    delta = r._num(node, "delta", DEFAULTS["delta"], check=lambda x: 0 <= x < 1, what="must lie in [0, 1)")
    kappa = r._num(node, "kappa", DEFAULTS["kappa"], check=lambda x: x > 0, what="must be positive")
    material = [c for c in node.children if c.tag == "material"]
    if material:
        if "rho" in node.attrib or "delta" in node.attrib:
            r.error("BAD_VALUE", "give either rho/delta or <material>, not both", node)
        rows = r._floats(material[0], material[0].text, 2)
        if rows is not None:
            try:
                rho, delta = fit_reflection_coeffs([tuple(row) for row in rows], fs)
            except ValueError as exc:
                r.error("BAD_VALUE", f"material: {exc}", material[0])
    if v is None:
        return None
    try:
        return Reflector(v, rho, delta, kappa, name=name)
    except ValueError as exc:
        r.error("BAD_VALUE", str(exc), node)
        return None


def _obstacle(r: _Reader, node) -> Obstacle | None:
    name = r.name(node, "obstacle")
    v = r.vertices(node)
    att = r._num(node, "attenuation", DEFAULTS["attenuation"], check=lambda x: 0 <= x <= 1,
                 what="must lie in [0, 1]")
    if v is None:
        return None
    try:
        return Obstacle(v, att, name=name)
    except ValueError as exc:
        r.error("BAD_VALUE", str(exc), node)
        return None


def _layout(r: _Reader, node) -> SpeakerLayout | None:
    spk = [c for c in node.children if c.tag == "speaker"]
    if not spk:
        return None
    az = [r._num(s, "az", 0.0, required=True) for s in spk]
    el = [r._num(s, "el", 0.0) for s in spk]
    rad = [r._num(s, "r", 1.0, check=lambda x: x > 0, what="must be positive") for s in spk]
    return SpeakerLayout.from_spherical(az, el, rad)


def _speaker_format(r: _Reader, node, kind, layout):
    if layout is None:
        r.error("FORMAT_LAYOUT", f"receiver type {kind!r} needs <speaker> elements", node)
        return None
    dims = r._num(node, "dims", 3 if kind == "nsp" else 2, int, check=lambda d: d in (2, 3), what="must be 2 or 3")
    if kind == "nsp":
        return NSP(layout, dims)
    if kind == "vbap":
        if len(layout) < 2:
            r.error("FORMAT_LAYOUT", "VBAP needs at least two speakers", node)
            return None
        return VBAP2D(layout)
    order = r._num(node, "order", DEFAULTS["order"], int, check=lambda m: m >= 1, what="must be >= 1")
    decoder = node.attrib.get("decoder", DEFAULTS["decoder"])
    if decoder not in ("basic", "maxre"):
        r.error("BAD_VALUE", f"decoder={decoder!r} must be basic or maxre", node)
        decoder = DEFAULTS["decoder"]
    if len(layout) < 2 * order + 1:
        r.error("HOA_ORDER", f"HOA2D order {order} needs at least {2 * order + 1} speakers, "
                f"got {len(layout)}", node)
        return None
    return HOA2D(layout, order, decoder)


def _receiver(r: _Reader, node) -> Receiver | None:
    name = r.name(node, "receiver")
    kind = node.attrib.get("type", "omni")
    traj = r.trajectory(node)
    layout = _layout(r, node)
    manifest = None
    if kind not in RECEIVER_TYPES:
        r.error("BAD_VALUE", f"unknown receiver type {kind!r}", node)
        return None
    if kind in ("omni", "fuma") and layout is not None:
        r.error("FORMAT_LAYOUT", f"receiver type {kind!r} takes no <speaker> elements", node)
    if kind == "omni":
        a = r._num(node, "a", DEFAULTS["a"], check=lambda x: 0 <= x <= 1, what="must lie in [0, 1]")
        fmt = VirtualMic(a)
    elif kind == "fuma":
        order = r._num(node, "order", 1, int, check=lambda m: m in (1, 2, 3), what="must be 1, 2 or 3")
        dims = r._num(node, "dims", 3, int, check=lambda d: d in (2, 3), what="must be 2 or 3")
        fmt = AmbiFuma(order, dims)
    elif kind == "binaural":
        inner_kind = node.attrib.get("inner", "nsp")
        if inner_kind not in SPEAKER_TYPES:
            r.error("BAD_VALUE", f"inner={inner_kind!r} must be one of {sorted(SPEAKER_TYPES)}", node)
            return None
        inner = _speaker_format(r, node, inner_kind, layout)
        if "hrirs" not in node.attrib:
            r.error("MISSING_ATTR", "binaural receivers need an 'hrirs' manifest", node)
            return None
        manifest = node.attrib["hrirs"]
        if inner is None:
            return None
        try:
            hrirs = load_hrir_set(r.resolve(manifest)).match(inner.layout)
        except (OSError, ValueError, KeyError) as exc:
            r.error("HRIR_LOAD", str(exc), node)
            return None
        fmt = Binaural(inner, hrirs)
    else:
        fmt = _speaker_format(r, node, kind, layout)
    if fmt is None:
        return None
    return Receiver(name, fmt, traj, hrir_manifest=manifest)


def check_scene(text: str, base_dir=None) -> tuple[Scene | None, list[Diagnostic]]:
    """Parse ``text`` and return the scene (None on errors) with all
    parse diagnostics."""
    r = _Reader(base_dir)
    try:
        root = _build_tree(text)
    except expat.ExpatError as exc:
        return None, [Diagnostic("SYNTAX", expat.ErrorString(exc.code), exc.lineno, exc.offset + 1)]
    if root.tag != "scene":
        r.error("UNKNOWN_ELEMENT", f"root element must be <scene>, got <{root.tag}>", root)
        return None, r.diags
    r.check_structure(root)
    params = _params(r, root)
    scene = Scene(params=params, name=root.attrib.get("name", ""),
                  base_dir=Path(base_dir) if base_dir is not None else None, locations=r.names)
    for child in root.children:
        if child.tag == "source":
            scene.sources.append(_source(r, child))
        elif child.tag == "diffuse":
            scene.diffuse.append(_diffuse(r, child))
        elif child.tag == "face":
            obj = _face(r, child, params.fs)
            if obj is not None:
                scene.reflectors.append(obj)
        elif child.tag == "obstacle":
            obj = _obstacle(r, child)
            if obj is not None:
                scene.obstacles.append(obj)
        elif child.tag == "receiver":
            obj = _receiver(r, child)
            if obj is not None:
                scene.receivers.append(obj)
    scene.locations[None] = (root.line, root.column)
    errors = [d for d in r.diags if d.severity == "error"]
    return (None if errors else scene), r.diags


def parse_scene(text: str, base_dir=None) -> Scene:
    """Parse a scene document; raises :class:`SceneError` listing every
    error found."""
    scene, diags = check_scene(text, base_dir)
    if scene is None:
        raise SceneError([d for d in diags if d.severity == "error"])
    return scene


def load_scene(path: str | Path) -> Scene:
    path = Path(path)
    return parse_scene(path.read_text(encoding="utf-8"), base_dir=path.parent)


def validate_scene(scene: Scene | str, duration: float | None = None, base_dir=None) -> list[Diagnostic]:
    """Semantic checks on a scene.  Text input is parsed first and its parse
    diagnostics are included."""
    diags: list[Diagnostic] = []
    if isinstance(scene, str):
        scene, diags = check_scene(scene, base_dir)
        if scene is None:
            return diags

    def at(code, msg, name=None, severity="warning"):
        line, col = scene.locations.get(name, (None, None))
        diags.append(Diagnostic(code, msg, line, col, severity))
    if not scene.sources and not scene.diffuse:
        at("NO_SOURCES", "scene has no sources")
    if not scene.receivers:
        at("NO_RECEIVERS", "scene has no receivers")
    for rec in scene.receivers:
        fmt = rec.format.inner if isinstance(rec.format, Binaural) else rec.format
        if isinstance(fmt, HOA2D):
            if len(fmt.layout) < 2 * fmt.order + 1:
                at("HOA_ORDER", f"{rec.name}: HOA2D order {fmt.order} needs at least "
                   f"{2 * fmt.order + 1} speakers", rec.name, "error")
            dev = fmt.layout.ring_deviation()
            if dev > 1e-6:
                at("IRREGULAR_RING", f"{rec.name}: speaker spacing deviates up to "
                   f"{math.degrees(dev):.3g} deg from an equal ring", rec.name)
    for d in scene.diffuse:
        if d.box.ramp > 0.5 * min(d.box.size):
            at("RAMP_TOO_LARGE", f"{d.name}: ramp {d.box.ramp:g} m exceeds half the "
               f"smallest box dimension", d.name)
    if duration is not None:
        moving = [(o.name, o.trajectory) for o in list(scene.sources) + list(scene.receivers)]
        moving += [(d.name, d.box.trajectory) for d in scene.diffuse]
        for name, traj in moving:
            if traj.end_time > duration:
                at("TRAJ_PAST_END", f"{name}: trajectory runs to {traj.end_time:g} s, "
                   f"past the {duration:g} s render", name)
    return diags


# -- serialization -------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def _deg(v: float) -> str:
    return "%.12g" % math.degrees(v)


def _traj_xml(traj: Trajectory, indent: str) -> list[str]:
    lines = []
    default = len(traj.pos_times) == 1 and not np.any(traj.positions) and traj.mode == CARTESIAN
    if not default:
        rows = "\n".join(f"{indent}  {_fmt(t)} " + " ".join(_fmt(x) for x in p)
                         for t, p in zip(traj.pos_times, traj.positions))
        attr = f' interp="{traj.mode}"' if traj.mode != CARTESIAN else ""
        lines.append(f"{indent}<position{attr}>\n{rows}\n{indent}</position>")
    if len(traj.rot_times) > 1 or np.any(traj.orientations):
        rows = "\n".join(f"{indent}  {_fmt(t)} " + " ".join(_deg(x) for x in o)
                         for t, o in zip(traj.rot_times, traj.orientations))
        lines.append(f"{indent}<orientation>\n{rows}\n{indent}</orientation>")
    return lines


def _element(tag: str, attrs: dict, children: list[str], indent: str) -> str:
    a = "".join(f" {k}={quoteattr(str(v))}" for k, v in attrs.items() if v is not None)
    if not children:
        return f"{indent}<{tag}{a}/>"
    return f"{indent}<{tag}{a}>\n" + "\n".join(children) + f"\n{indent}</{tag}>"


def _vertices(v: np.ndarray) -> str:
    return "  ".join(" ".join(_fmt(x) for x in row) for row in v)


def _receiver_attrs(rec: Receiver) -> tuple[dict, SpeakerLayout | None]:
    fmt = rec.format
    attrs = {"name": rec.name}
    inner = fmt.inner if isinstance(fmt, Binaural) else fmt
    if isinstance(fmt, Binaural):
        attrs.update(type="binaural", inner=inner.kind, hrirs=rec.hrir_manifest)
    if isinstance(inner, VirtualMic):
        attrs.update(type="omni", a=_fmt(inner.a))
        return attrs, None
    if isinstance(inner, AmbiFuma):
        attrs.update(type="fuma", order=inner.order, dims=inner.dims)
        return attrs, None
    attrs.setdefault("type", inner.kind)
    if isinstance(inner, NSP):
        attrs["dims"] = inner.dims
    if isinstance(inner, HOA2D):
        attrs.update(order=inner.order, decoder=inner.decoder_type)
    return attrs, inner.layout


def serialize_scene(scene: Scene) -> str:
    """XML text for ``scene``.  In-memory audio arrays are not serialized."""
    p = scene.params
    ind = "  "
    body: list[str] = []
    for s in scene.sources:
        attrs = {"name": s.name, "file": s.audio if isinstance(s.audio, (str, Path)) else None,
                 "loop": "true" if s.loop else None, "gain": _fmt(s.gain) if s.gain != 1.0 else None,
                 "f6db": _fmt(s.f6db) if s.f6db is not None else None}
        body.append(_element("source", attrs, _traj_xml(s.trajectory, ind * 2), ind))
    for d in scene.diffuse:
        attrs = {"name": d.name, "file": d.audio if isinstance(d.audio, (str, Path)) else None,
                 "loop": "true" if d.loop else None, "gain": _fmt(d.gain) if d.gain != 1.0 else None,
                 "size": " ".join(_fmt(x) for x in d.box.size), "ramp": _fmt(d.box.ramp)}
        body.append(_element("diffuse", attrs, _traj_xml(d.box.trajectory, ind * 2), ind))
    for f in scene.reflectors:
        attrs = {"name": f.name, "vertices": _vertices(f.vertices), "rho": _fmt(f.rho),
                 "delta": _fmt(f.delta), "kappa": _fmt(f.kappa)}
        body.append(_element("face", attrs, [], ind))
    for o in scene.obstacles:
        attrs = {"name": o.name, "vertices": _vertices(o.vertices), "attenuation": _fmt(o.attenuation)}
        body.append(_element("obstacle", attrs, [], ind))
    for rec in scene.receivers:
        attrs, layout = _receiver_attrs(rec)
        children = _traj_xml(rec.trajectory, ind * 2)
        if layout is not None:
            for pos, az, el in zip(layout.positions, layout.azimuths, layout.elevations):
                children.append(_element("speaker", {"az": _deg(az), "el": _deg(el),
                                                     "r": "%.12g" % np.linalg.norm(pos)}, [], ind * 2))
        body.append(_element("receiver", attrs, children, ind))
    head = {"name": scene.name or None, "fs": _fmt(p.fs), "c": _fmt(p.c), "blocksize": p.block_size,
            "image_order": p.image_order, "r_min": _fmt(p.r_min), "air_constant": _fmt(p.air_constant),
            "max_distance": _fmt(p.max_distance), "interpolation": p.interpolation,
            "retarded": "true" if p.retarded_time else "false"}
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + _element("scene", head, body, "") + "\n"


__all__ = ["DEFAULTS", "Diagnostic", "SceneError", "check_scene", "load_scene", "parse_scene",
           "serialize_scene", "validate_scene"]
