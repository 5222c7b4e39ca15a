# coding: utf-8
# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

from __future__ import absolute_import, division
from txrpt.config import ModelConfig, load_config
from txrpt.model import RPTModel, forward_full
from txrpt.training import train
from txrpt.evaluation import evaluate


assert ModelConfig
assert load_config
assert RPTModel
assert forward_full
assert train
assert evaluate
