from __future__ import annotations


class MdanLabError(Exception):
    """所有 mdanlab 异常的基类；CLI 统一捕获并以非零退出码返回。"""


class ShapeError(MdanLabError, ValueError):
    pass


class InputError(MdanLabError, ValueError):
    pass


class ParseError(InputError):
    def __init__(self, message: str, *, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class NumericError(MdanLabError, ArithmeticError):
    def __init__(self, message: str, *, layer: int | None = None):
        self.layer = layer
        super().__init__(message if layer is None else f"{message} (layer {layer})")


class ModeError(MdanLabError, RuntimeError):
    pass


class ConfigError(MdanLabError, ValueError):
    pass
