"""Readers for the two on-disk inputs: native .pyc files and JSON dumps.

The marshal reader is restricted to the object types CPython's compiler
actually emits into code objects.  It never reads past the input and every
failure is a typed MalformedMarshal carrying the byte offset.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass

from .code_model import CodeObject, Const, VersionTag
from .errors import MalformedMarshal, SchemaError, TruncatedHeader, UnknownMagic

# importlib MAGIC_NUMBER, first two bytes, per release line
MAGIC_TO_VERSION = {
    3413: (3, 8),
    3425: (3, 9),
    3439: (3, 10),
    3495: (3, 11),
}

PYC_HEADER_LEN = 16


@dataclass(frozen=True)
class PycHeader:
    magic: int
    bitfield: int
    mtime_or_hash: bytes


def parse_pyc_header(data: bytes):
    """Parse the PEP 552 16-byte header and resolve the interpreter version."""
    if len(data) < PYC_HEADER_LEN:
        raise TruncatedHeader(f"pyc header needs 16 bytes, got {len(data)}")
    if data[2:4] != b"\r\n":
        raise UnknownMagic(int.from_bytes(data[0:4], "little"))
    magic = int.from_bytes(data[0:2], "little")
    if magic not in MAGIC_TO_VERSION:
        raise UnknownMagic(magic)
    bitfield = int.from_bytes(data[4:8], "little")
    header = PycHeader(magic, bitfield, data[8:16])
    return header, VersionTag(*MAGIC_TO_VERSION[magic])


def load_pyc(data: bytes) -> tuple[VersionTag, CodeObject]:
    header, version = parse_pyc_header(data)
    return version, parse_marshal(data[PYC_HEADER_LEN:], version)


# ------------------------------------------------------------------ marshal

FLAG_REF = 0x80

_SIMPLE_TYPES = {
    ord("N"): Const("none"),
    ord("T"): Const("bool", True),
    ord("F"): Const("bool", False),
    ord("."): Const("ellipsis"),
}

_UNSUPPORTED_TYPES = {
    ord("["): "list",
    ord("{"): "dict",
    ord("<"): "set",
    ord("S"): "StopIteration",
    ord("0"): "NULL",
    ord("?"): "unknown",
}

_MAX_NESTING = 256


class _Reader:
    def __init__(self, data, version):
        self.data = data
        self.pos = 0
        self.version = version
        self.refs = []
        self.depth = 0

    def fail(self, message, offset=None):
        raise MalformedMarshal(message, self.pos if offset is None else offset)

    def take(self, n):
        if n < 0 or self.pos + n > len(self.data):
            self.fail(f"need {n} bytes, {len(self.data) - self.pos} left")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self):
        return self.take(1)[0]

    def i32(self):
        return struct.unpack("<i", self.take(4))[0]

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def read_object(self):
        start = self.pos
        if self.depth >= _MAX_NESTING:
            self.fail("marshal nesting too deep", start)
        tbyte = self.u8()
        flag_ref = bool(tbyte & FLAG_REF)
        t = tbyte & ~FLAG_REF

        if t == ord("r"):
            idx = self.i32()
            if not 0 <= idx < len(self.refs):
                self.fail(f"reference {idx} out of range", start)
            obj = self.refs[idx]
            if obj is None:
                self.fail(f"reference {idx} to incomplete object", start)
            return obj

        if t in _SIMPLE_TYPES:
            obj = _SIMPLE_TYPES[t]
            if flag_ref:
                self.refs.append(obj)
            return obj

        if t in _UNSUPPORTED_TYPES:
            self.fail(f"marshal type {_UNSUPPORTED_TYPES[t]!r} not produced by compile", start)

        handler = _HANDLERS.get(t)
        if handler is None:
            self.fail(f"bad marshal type byte {t:#04x}", start)

        # Containers reserve their ref slot before children are read; a
        # child referencing the reserved slot would make a cycle, which the
        # constant model forbids, so such a reference fails above.
        reserve = flag_ref and t in _CONTAINER_TYPES
        slot = None
        if reserve:
            slot = len(self.refs)
            self.refs.append(None)
        self.depth += 1
        try:
            obj = handler(self)
        finally:
            self.depth -= 1
        if reserve:
            self.refs[slot] = obj
        elif flag_ref:
            self.refs.append(obj)
        return obj


def _read_int32(r):
    return Const("int", r.i32())


def _read_long(r):
    n = r.i32()
    ndigits = abs(n)
    value = 0
    for i in range(ndigits):
        digit = struct.unpack("<H", r.take(2))[0]
        if digit >= 1 << 15:
            r.fail("long digit out of range")
        value |= digit << (15 * i)
    return Const("int", -value if n < 0 else value)


def _read_binary_float(r):
    return Const("float", struct.unpack("<d", r.take(8))[0])


def _read_text_float(r):
    n = r.u8()
    try:
        return Const("float", float(r.take(n).decode("ascii")))
    except (ValueError, UnicodeDecodeError):
        r.fail("bad text float")


def _read_binary_complex(r):
    re, im = struct.unpack("<dd", r.take(16))
    return Const("complex", complex(re, im))


def _read_bytes(r):
    n = r.i32()
    if n < 0:
        r.fail("negative bytes length")
    return Const("bytes", bytes(r.take(n)))


def _read_unicode(r):
    n = r.i32()
    if n < 0:
        r.fail("negative string length")
    try:
        return Const("str", r.take(n).decode("utf-8", "surrogatepass"))
    except UnicodeDecodeError:
        r.fail("undecodable unicode payload")


def _read_ascii(r):
    n = r.i32()
    if n < 0:
        r.fail("negative string length")
    return Const("str", r.take(n).decode("latin-1"))


def _read_short_ascii(r):
    n = r.u8()
    return Const("str", r.take(n).decode("latin-1"))


def _read_tuple(r, n=None):
    if n is None:
        n = r.i32()
    if n < 0:
        r.fail("negative tuple length")
    return Const("tuple", tuple(r.read_object() for _ in range(n)))


def _read_small_tuple(r):
    return _read_tuple(r, r.u8())


def _read_frozenset(r):
    n = r.i32()
    if n < 0:
        r.fail("negative frozenset length")
    return Const("frozenset", tuple(r.read_object() for _ in range(n)))


def _expect(r, const, what):
    if not isinstance(const, Const) or const.kind != what:
        r.fail(f"expected {what} in code object, got {getattr(const, 'kind', type(const).__name__)}")
    return const.value


def _expect_str_tuple(r, const):
    items = _expect(r, const, "tuple")
    return tuple(_expect(r, c, "str") for c in items)


def _read_code(r):
    v = r.version
    argcount = r.i32()
    posonlyargcount = r.i32()
    kwonlyargcount = r.i32()
    if v.minor <= 10:
        nlocals = r.i32()
    stacksize = r.i32()
    flags = r.i32()
    code = _expect(r, r.read_object(), "bytes")
    consts = _expect(r, r.read_object(), "tuple")
    names = _expect_str_tuple(r, r.read_object())
    if v.minor <= 10:
        varnames = _expect_str_tuple(r, r.read_object())
        freevars = _expect_str_tuple(r, r.read_object())
        cellvars = _expect_str_tuple(r, r.read_object())
        filename = _expect(r, r.read_object(), "str")
        name = _expect(r, r.read_object(), "str")
        qualname = name
        firstlineno = r.i32()
        linetable = _expect(r, r.read_object(), "bytes")
        exceptiontable = b""
    else:
        localsplusnames = _expect_str_tuple(r, r.read_object())
        localspluskinds = _expect(r, r.read_object(), "bytes")
        if len(localspluskinds) != len(localsplusnames):
            r.fail("localsplus kinds/names length mismatch")
        varnames = tuple(
            n for n, k in zip(localsplusnames, localspluskinds) if k & 0x20
        )
        cellvars = tuple(
            n for n, k in zip(localsplusnames, localspluskinds) if k & 0x40
        )
        freevars = tuple(
            n for n, k in zip(localsplusnames, localspluskinds) if k & 0x80
        )
        nlocals = len(varnames)
        filename = _expect(r, r.read_object(), "str")
        name = _expect(r, r.read_object(), "str")
        qualname = _expect(r, r.read_object(), "str")
        firstlineno = r.i32()
        linetable = _expect(r, r.read_object(), "bytes")
        exceptiontable = _expect(r, r.read_object(), "bytes")

    for const in consts:
        if not isinstance(const, Const):
            r.fail("non-constant in consts tuple")

    co = CodeObject(
        version=v,
        argcount=argcount,
        posonlyargcount=posonlyargcount,
        kwonlyargcount=kwonlyargcount,
        nlocals=nlocals,
        stacksize=stacksize,
        flags=flags,
        code=code,
        consts=consts,
        names=names,
        varnames=varnames,
        freevars=freevars,
        cellvars=cellvars,
        name=name,
        filename=filename,
        firstlineno=firstlineno,
        linetable=linetable,
        exceptiontable=exceptiontable,
        qualname=qualname,
    )
    if v.minor >= 11 and co.localsplus != localsplusnames:
        r.fail(
            f"localsplus layout {localsplusnames} not reproducible from "
            f"varnames/cellvars/freevars"
        )
    return Const("code", co)


_HANDLERS = {
    ord("i"): _read_int32,
    ord("l"): _read_long,
    ord("g"): _read_binary_float,
    ord("f"): _read_text_float,
    ord("y"): _read_binary_complex,
    ord("s"): _read_bytes,
    ord("u"): _read_unicode,
    ord("t"): _read_unicode,
    ord("a"): _read_ascii,
    ord("A"): _read_ascii,
    ord("z"): _read_short_ascii,
    ord("Z"): _read_short_ascii,
    ord("("): _read_tuple,
    ord(")"): _read_small_tuple,
    ord(">"): _read_frozenset,
    ord("c"): _read_code,
}

_CONTAINER_TYPES = {ord("("), ord(")"), ord(">"), ord("c")}


def parse_marshal(data: bytes, version: VersionTag) -> CodeObject:
    """Decode a marshal stream into a CodeObject tree."""
    r = _Reader(data, version)
    obj = r.read_object()
    if not isinstance(obj, Const) or obj.kind != "code":
        r.fail("top-level marshal object is not a code object", 0)
    return obj.value


# --------------------------------------------------------------- JSON dumps

_CODE_FIELDS = {
    "argcount": int,
    "posonlyargcount": int,
    "kwonlyargcount": int,
    "nlocals": int,
    "stacksize": int,
    "flags": int,
    "code": str,
    "consts": list,
    "names": list,
    "varnames": list,
    "freevars": list,
    "cellvars": list,
    "name": str,
    "filename": str,
    "firstlineno": int,
    "linetable": str,
    "exceptiontable": str,
}


def load_json_dump(text: str, version_override=None) -> list[CodeObject]:
    """Load the portable JSON code-object dump format.

    Returns the root code objects (the format stores exactly one root, but
    the CLI treats the result as a list of top-level codes).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc.msg}", "$") from None
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object", "$")
    if doc.get("format_version") != 1:
        raise SchemaError("format_version must be 1", "$.format_version")
    ver = doc.get("python_version")
    if version_override is not None:
        version = version_override
    else:
        if (
            not isinstance(ver, list)
            or len(ver) != 2
            or not all(isinstance(x, int) for x in ver)
        ):
            raise SchemaError("python_version must be [major, minor]", "$.python_version")
        from .errors import UnsupportedVersion

        try:
            version = VersionTag(*ver)
        except UnsupportedVersion as exc:
            raise SchemaError(str(exc), "$.python_version") from None
    if "root" not in doc:
        raise SchemaError("missing field", "$.root")
    return [_code_from_json(doc["root"], "$.root", version)]


def _b64field(obj, path, key):
    raw = obj[key]
    if not isinstance(raw, str):
        raise SchemaError("expected base64 string", f"{path}.{key}")
    try:
        return base64.b64decode(raw, validate=True)
    except Exception:
        raise SchemaError("invalid base64", f"{path}.{key}") from None


def _code_from_json(obj, path, version) -> CodeObject:
    if not isinstance(obj, dict):
        raise SchemaError("code object must be a JSON object", path)
    for key, typ in _CODE_FIELDS.items():
        if key not in obj:
            raise SchemaError("missing field", f"{path}.{key}")
        if not isinstance(obj[key], typ) or isinstance(obj[key], bool):
            raise SchemaError(f"expected {typ.__name__}", f"{path}.{key}")
    for key in ("names", "varnames", "freevars", "cellvars"):
        if not all(isinstance(x, str) for x in obj[key]):
            raise SchemaError("expected list of strings", f"{path}.{key}")
    consts = tuple(
        _const_from_json(c, f"{path}.consts[{i}]", version)
        for i, c in enumerate(obj["consts"])
    )
    return CodeObject(
        version=version,
        argcount=obj["argcount"],
        posonlyargcount=obj["posonlyargcount"],
        kwonlyargcount=obj["kwonlyargcount"],
        nlocals=obj["nlocals"],
        stacksize=obj["stacksize"],
        flags=obj["flags"],
        code=_b64field(obj, path, "code"),
        consts=consts,
        names=tuple(obj["names"]),
        varnames=tuple(obj["varnames"]),
        freevars=tuple(obj["freevars"]),
        cellvars=tuple(obj["cellvars"]),
        name=obj["name"],
        filename=obj["filename"],
        firstlineno=obj["firstlineno"],
        linetable=_b64field(obj, path, "linetable"),
        exceptiontable=_b64field(obj, path, "exceptiontable"),
        qualname=obj.get("qualname", ""),
    )


def _const_from_json(obj, path, version) -> Const:
    if not isinstance(obj, dict) or "t" not in obj:
        raise SchemaError("constant must be an object with a 't' tag", path)
    t = obj["t"]
    try:
        if t == "none":
            return Const("none")
        if t == "ellipsis":
            return Const("ellipsis")
        if t == "bool":
            if not isinstance(obj["v"], bool):
                raise SchemaError("expected bool", f"{path}.v")
            return Const("bool", obj["v"])
        if t == "int":
            return Const("int", int(obj["v"]))
        if t == "float":
            return Const("float", float.fromhex(obj["v"]))
        if t == "complex":
            return Const("complex", complex(float.fromhex(obj["re"]), float.fromhex(obj["im"])))
        if t == "str":
            if not isinstance(obj["v"], str):
                raise SchemaError("expected string", f"{path}.v")
            return Const("str", obj["v"])
        if t == "bytes":
            return Const("bytes", _b64field(obj, path, "v"))
        if t == "tuple":
            return Const(
                "tuple",
                tuple(
                    _const_from_json(c, f"{path}.v[{i}]", version)
                    for i, c in enumerate(obj["v"])
                ),
            )
        if t == "frozenset":
            return Const(
                "frozenset",
                tuple(
                    _const_from_json(c, f"{path}.v[{i}]", version)
                    for i, c in enumerate(obj["v"])
                ),
            )
        if t == "code":
            return Const("code", _code_from_json(obj["v"], f"{path}.v", version))
    except KeyError as exc:
        raise SchemaError("missing field", f"{path}.{exc.args[0]}") from None
    except (ValueError, TypeError):
        raise SchemaError(f"bad value for constant of type {t!r}", path) from None
    raise SchemaError(f"unknown constant tag {t!r}", f"{path}.t")
