from collections import OrderedDict
from dataclasses import dataclass
import logging
from pathlib import Path
from typing import Optional

import numpy as np
from asset_extraction_framework.Asserts import assert_equal
from asset_extraction_framework.Exceptions import BinaryParsingError
from asset_extraction_framework.File import File

from ..Exceptions import InvalidParameterError
from ..MinMax import MinMaxState
from .Chunk import Chunk, ChunkWriter
from .LinearScorer import LinearScorer
from .MlpScorer import DEFAULT_HIDDEN_WIDTHS, MlpScorer
from .Scorer import Scorer

logger = logging.getLogger(__name__)

## A checkpoint holds a model's parameters and, optionally, the saddle-point
## state of the training run. All numbers are little-endian.
##  - 4-byte signature "UMCK", then a 16-bit format version.
##  - MODL chunk: model kind, input dimension, head count, hidden widths.
##  - SHPE chunk: the shape table, one (name, ndim, dims...) entry per parameter.
##  - PARM chunk: every parameter as 64-bit floats, in shape table order, row-major.
##  - MMST chunk (optional): label count, margin, constrained flag, step and
##    epoch counters, then the a, b and alpha arrays.
CHECKPOINT_SIGNATURE = b'UMCK'
CHECKPOINT_VERSION = 1

MODEL_KINDS = {LinearScorer.kind: LinearScorer, MlpScorer.kind: MlpScorer}

## \return A new scorer of the given kind. hidden_widths is only read for MLPs.
def create_scorer(kind: str, input_dimension: int, head_count: int, hidden_widths = None, seed = None) -> Scorer:
    if kind not in MODEL_KINDS:
        raise InvalidParameterError(f'Unknown model kind "{kind}". Expected one of {sorted(MODEL_KINDS)}.')
    if kind == MlpScorer.kind:
        return MlpScorer(input_dimension, head_count, hidden_widths or DEFAULT_HIDDEN_WIDTHS, seed)
    return LinearScorer(input_dimension, head_count, seed)

@dataclass
class Checkpoint:
    model: Scorer
    state: Optional[MinMaxState] = None

## Writes a model (and optionally the min-max state) to a checkpoint file.
def write_checkpoint(filepath: str, model: Scorer, state: Optional[MinMaxState] = None):
    # WRITE THE MODEL DESCRIPTION.
    model_chunk = ChunkWriter('MODL')
    model_chunk.string(model.kind)
    model_chunk.uint32(model.input_dimension)
    model_chunk.uint32(model.head_count)
    hidden_widths = getattr(model, 'hidden_widths', ())
    model_chunk.uint32(len(hidden_widths))
    for width in hidden_widths:
        model_chunk.uint32(width)

    # WRITE THE SHAPE TABLE AND PARAMETERS.
    shape_chunk = ChunkWriter('SHPE')
    parameter_chunk = ChunkWriter('PARM')
    shape_chunk.uint32(len(model.parameters))
    for name, parameter in model.parameters.items():
        shape_chunk.string(name)
        shape_chunk.uint16(parameter.ndim)
        for dimension in parameter.shape:
            shape_chunk.uint32(dimension)
        parameter_chunk.float64_array(parameter.ravel())
    chunks = [model_chunk, shape_chunk, parameter_chunk]

    # WRITE THE MIN-MAX STATE.
    if state is not None:
        state_chunk = ChunkWriter('MMST')
        state_chunk.uint32(state.label_count)
        state_chunk.float64(state.margin)
        state_chunk.uint8(int(state.constrained))
        state_chunk.uint32(state.step_count)
        state_chunk.uint32(state.epoch_count)
        state_chunk.float64_array(state.a)
        state_chunk.float64_array(state.b)
        state_chunk.float64_array(state.alpha)
        chunks.append(state_chunk)

    Path(filepath).parent.mkdir(parents = True, exist_ok = True)
    with open(filepath, 'wb') as checkpoint_file:
        checkpoint_file.write(CHECKPOINT_SIGNATURE)
        checkpoint_file.write(np.array(CHECKPOINT_VERSION, dtype = '<u2').tobytes())
        for chunk in chunks:
            checkpoint_file.write(chunk.to_bytes())
    logger.info(f'Wrote checkpoint {filepath} ({model.parameter_count} parameters)')

## A checkpoint file on disk.
class CheckpointFile(File):
    def __init__(self, filepath: str = None, stream = None):
        # OPEN THE FILE FOR READING.
        super().__init__(filepath, stream)

        # READ THE HEADER.
        assert_equal(self.stream.read(4), CHECKPOINT_SIGNATURE, 'checkpoint signature')
        version = np.frombuffer(self.stream.read(2), dtype = '<u2')
        if version.size != 1 or int(version[0]) != CHECKPOINT_VERSION:
            raise BinaryParsingError(f'Unsupported checkpoint version {version.tolist()}.', self.stream)

        # READ THE MODEL.
        model = self._read_model(self._expect_chunk('MODL'))
        shapes = self._read_shape_table(self._expect_chunk('SHPE'))
        if list(shapes.items()) != list(model.parameter_shapes.items()):
            raise BinaryParsingError(f'The shape table {dict(shapes)} does not match a {model.kind} model.', self.stream)
        parameter_chunk = self._expect_chunk('PARM')
        for name, shape in shapes.items():
            count = int(np.prod(shape)) if len(shape) > 0 else 1
            model.parameters[name] = parameter_chunk.read_float64_array(count).reshape(shape)
        if not parameter_chunk.at_end:
            raise BinaryParsingError(f'{parameter_chunk.bytes_remaining_count} unread bytes at the end of the parameter chunk.', self.stream)

        # READ THE MIN-MAX STATE, IF PRESENT.
        state = None
        remaining = self.stream.read(1)
        if remaining:
            self.stream.seek(-1, 1)
            state_chunk = self._expect_chunk('MMST')
            state = self._read_state(state_chunk)
        self.checkpoint = Checkpoint(model, state)

    def _expect_chunk(self, fourcc: str) -> Chunk:
        chunk = Chunk(self.stream)
        assert_equal(chunk.fourcc, fourcc, 'checkpoint chunk')
        return chunk

    def _read_model(self, chunk: Chunk) -> Scorer:
        kind = chunk.read_string()
        if kind not in MODEL_KINDS:
            raise BinaryParsingError(f'Unknown model kind "{kind}" in checkpoint.', self.stream)
        input_dimension = chunk.read_uint32()
        head_count = chunk.read_uint32()
        hidden_widths = [chunk.read_uint32() for _ in range(chunk.read_uint32())]
        return create_scorer(kind, input_dimension, head_count, hidden_widths)

    def _read_shape_table(self, chunk: Chunk):
        shapes = OrderedDict()
        for _ in range(chunk.read_uint32()):
            name = chunk.read_string()
            ndim = chunk.read_uint16()
            shapes[name] = tuple(chunk.read_uint32() for _ in range(ndim))
        return shapes

    def _read_state(self, chunk: Chunk) -> MinMaxState:
        label_count = chunk.read_uint32()
        margin = chunk.read_float64()
        constrained = bool(chunk.read_uint8())
        step_count = chunk.read_uint32()
        epoch_count = chunk.read_uint32()
        a = chunk.read_float64_array(label_count)
        b = chunk.read_float64_array(label_count)
        alpha = chunk.read_float64_array(label_count)
        return MinMaxState(a, b, alpha, margin, constrained, step_count, epoch_count)

## Reads a checkpoint written by write_checkpoint().
def read_checkpoint(filepath: str) -> Checkpoint:
    return CheckpointFile(filepath).checkpoint
