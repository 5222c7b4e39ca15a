# coding: utf-8
# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.


class RPTError(Exception):
    """Base class for every error raised by txrpt.

    .. versionadded:: 26.1.0
    """


class DimensionError(RPTError, ValueError):
    """Raised when tensor shapes or image extents do not line up.

    .. versionadded:: 26.1.0
    """


class AxisError(RPTError, IndexError):
    """Raised when a reduction names an axis that is out of range or repeated.

    .. versionadded:: 26.1.0
    """


class DegenerateVectorError(RPTError, ArithmeticError):
    """Raised when a vector that must be normalized has (near) zero norm.

    .. versionadded:: 26.1.0
    """


class ContractError(RPTError):
    """Raised when a caller breaks the calling contract of an operation.

    .. versionadded:: 26.1.0
    """


class ConfigurationError(RPTError):
    """Raised for invalid model configurations and malformed config files.

    .. versionadded:: 26.1.0
    """


class VocabularyError(RPTError, KeyError):
    """Raised when a word is missing from the fixed vocabulary table.

    .. versionadded:: 26.1.0
    """


class NonFiniteError(RPTError, FloatingPointError):
    """Raised when NaN or Inf values show up in a tensor.

    .. versionadded:: 26.1.0
    """


class CheckpointError(RPTError):
    """Raised when a checkpoint file is malformed or does not fit the model.

    .. versionadded:: 26.1.0
    """


class GradientCheckFailed(RPTError):
    """Raised when analytic and numeric gradients disagree beyond tolerance.

    .. versionadded:: 26.1.0
    """


class TimeExceeded(RPTError):
    """Raised when deadline or timeout for a call has been exceeded.

    .. versionadded:: 26.1.0
    """
