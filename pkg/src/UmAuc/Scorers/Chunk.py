import numpy as np
import self_documenting_struct as struct
from asset_extraction_framework.Exceptions import BinaryParsingError

## DEFINE CHUNK-RELATED ERRORS.
class ZeroLengthChunkError(BinaryParsingError):
    pass

FOURCC_LENGTH = 4

## A RIFF-style chunk of a checkpoint file: a four-character code, a 32-bit
## little-endian length, and then that many bytes of data.
##
## Reading is bounds-checked; client code reads through read() so that a
## truncated or corrupt file raises instead of running into the next chunk.
class Chunk:
    def __init__(self, stream):
        self.stream = stream
        fourcc = stream.read(FOURCC_LENGTH)
        if len(fourcc) != FOURCC_LENGTH:
            raise BinaryParsingError('Unexpected end of file while reading a chunk header.', stream)
        self.fourcc = fourcc.decode('ascii')
        self.length = struct.unpack.uint32_le(stream)
        if self.length == 0:
            raise ZeroLengthChunkError(f'Encountered a zero-length "{self.fourcc}" chunk. This usually indicates a corrupted checkpoint.', stream)
        self.data_start_pointer = stream.tell()

    ## Skips over the rest of the chunk, leaving the stream at the next chunk.
    def skip(self):
        self.stream.read(self.bytes_remaining_count)

    ## Reads the given number of bytes from the chunk, or throws an error if there
    ## is an attempt to read past the end of the chunk.
    def read(self, number_of_bytes: int) -> bytes:
        # VERIFY WE WILL NOT READ PAST THE END OF THE CHUNK.
        new_end_pointer = self.stream.tell() + number_of_bytes
        if new_end_pointer > self.end_pointer:
            bytes_past_chunk_end = new_end_pointer - self.end_pointer
            raise BinaryParsingError(
                f'Attempted to read {bytes_past_chunk_end} bytes past end of chunk "{self.fourcc}". Attempted read started at 0x{self.stream.tell():02x}.',
                self.stream)

        # READ THE REQUESTED DATA.
        data = self.stream.read(number_of_bytes)
        if len(data) != number_of_bytes:
            raise BinaryParsingError(f'The file ends inside chunk "{self.fourcc}".', self.stream)
        return data

    def read_uint8(self) -> int:
        self._verify_remaining(1)
        return struct.unpack.uint8(self.stream)

    def read_uint16(self) -> int:
        self._verify_remaining(2)
        return struct.unpack.uint16_le(self.stream)

    def read_uint32(self) -> int:
        self._verify_remaining(4)
        return struct.unpack.uint32_le(self.stream)

    def read_float64(self) -> float:
        return struct.unpack.raw('<d', self.read(8))[0]

    ## Reads a 16-bit length followed by that many ASCII characters.
    def read_string(self) -> str:
        length = self.read_uint16()
        return self.read(length).decode('ascii')

    ## Reads count little-endian 64-bit floats.
    def read_float64_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.read(8 * count), dtype = '<f8').astype(np.float64)

    @property
    def bytes_remaining_count(self) -> int:
        return self.end_pointer - self.stream.tell()

    @property
    def at_end(self) -> bool:
        return self.stream.tell() >= self.end_pointer

    @property
    def end_pointer(self) -> int:
        return self.data_start_pointer + self.length

    def _verify_remaining(self, number_of_bytes: int):
        if self.bytes_remaining_count < number_of_bytes:
            raise BinaryParsingError(f'Attempted to read past end of chunk "{self.fourcc}".', self.stream)

## Builds the bytes of chunk payloads.
class ChunkWriter:
    def __init__(self, fourcc: str):
        if len(fourcc) != FOURCC_LENGTH:
            raise ValueError(f'A FourCC must be {FOURCC_LENGTH} characters, got "{fourcc}".')
        self.fourcc = fourcc
        self.parts = []

    def uint8(self, value: int):
        self.parts.append(np.array(value, dtype = '<u1').tobytes())

    def uint16(self, value: int):
        self.parts.append(np.array(value, dtype = '<u2').tobytes())

    def uint32(self, value: int):
        self.parts.append(np.array(value, dtype = '<u4').tobytes())

    def float64(self, value: float):
        self.parts.append(np.array(value, dtype = '<f8').tobytes())

    def string(self, value: str):
        encoded = value.encode('ascii')
        self.uint16(len(encoded))
        self.parts.append(encoded)

    def float64_array(self, values):
        self.parts.append(np.ascontiguousarray(values, dtype = '<f8').tobytes())

    ## \return The full chunk: FourCC, 32-bit length and payload.
    def to_bytes(self) -> bytes:
        payload = b''.join(self.parts)
        return self.fourcc.encode('ascii') + np.array(len(payload), dtype = '<u4').tobytes() + payload
