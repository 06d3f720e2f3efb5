"""Exception hierarchy for every pipeline stage.

All errors carry enough position info (byte offset, block id) to point a
user at the failing spot in a listing.
"""


class UnpyreError(Exception):
    """Base class for all tool errors."""


class UnsupportedVersion(UnpyreError):
    def __init__(self, major, minor):
        super().__init__(f"unsupported Python version {major}.{minor} (supported: 3.8-3.11)")
        self.major = major
        self.minor = minor


# ---------------------------------------------------------------- loaders

class UnknownMagic(UnpyreError):
    def __init__(self, magic):
        super().__init__(f"unknown pyc magic {magic:#06x} (unsupported interpreter version)")
        self.magic = magic


class TruncatedHeader(UnpyreError):
    pass


class MalformedMarshal(UnpyreError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class SchemaError(UnpyreError):
    def __init__(self, message, path):
        super().__init__(f"{message} (at {path})")
        self.path = path


# ---------------------------------------------------------------- disasm

class UnknownOpcode(UnpyreError):
    def __init__(self, opcode, offset):
        super().__init__(f"unknown opcode {opcode} at offset {offset}")
        self.opcode = opcode
        self.offset = offset


class TruncatedCode(UnpyreError):
    pass


class BadJumpTarget(UnpyreError):
    def __init__(self, offset, target):
        super().__init__(f"jump at offset {offset} targets {target}, not an instruction boundary")
        self.offset = offset
        self.target = target


class MalformedExceptionTable(UnpyreError):
    pass


# ---------------------------------------------------------------- symexec

class StackUnderflow(UnpyreError):
    def __init__(self, offset, opname=""):
        super().__init__(f"evaluation stack underflow at offset {offset}" + (f" ({opname})" if opname else ""))
        self.offset = offset


class UnsupportedOpcode(UnpyreError):
    """Raised for opcodes outside the lifting matrix (async, 3.12+ forms)."""

    def __init__(self, opname, offset):
        super().__init__(f"no lifting rule for {opname} at offset {offset}")
        self.opname = opname
        self.offset = offset


class StackDepthMismatch(UnpyreError):
    def __init__(self, block_id, depths):
        super().__init__(f"predecessors of block {block_id} disagree on stack depth: {depths}")
        self.block_id = block_id


# ---------------------------------------------------------------- structurer

class StructuringFailed(UnpyreError):
    def __init__(self, block_id, reason):
        super().__init__(f"cannot structure region at block {block_id}: {reason}")
        self.block_id = block_id
        self.reason = reason


# ---------------------------------------------------------------- emitter

class InternalMarkerLeak(UnpyreError):
    """A control-flow marker survived structuring; always a bug, never user error."""
