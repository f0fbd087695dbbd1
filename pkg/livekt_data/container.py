# livekt_data/container.py
#

'''
This module reads and writes the common binary container used for model
weights (magic "LKTW") and ingested datasets (magic "LKTD").

Layout, all integers little-endian:

    magic        4 bytes
    version      uint32
    body:
      kind       uint16 length + UTF-8 text
      metadata   uint32 length + UTF-8 canonical JSON
      n_tensors  uint32
      tensors    uint16 name length + UTF-8 name, uint8 dtype code,
                 uint8 ndim, ndim x uint32 shape, row-major data
    crc32        uint32 over the body bytes
'''

# Import packages
import json
import os
import struct
import tempfile
import zlib
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from livekt_data.data_model import Dataset, Sequence, Vocab

FORMAT_VERSION = 1
WEIGHTS_MAGIC = b'LKTW'
DATASET_MAGIC = b'LKTD'

# dtype code -> little-endian numpy dtype
DTYPES = {0: np.dtype('<f4'), 1: np.dtype('<i4')}
DTYPE_CODES = {dt: code for code, dt in DTYPES.items()}


class ContainerFormatError(ValueError):
    '''
    Raised when a file is not a valid container
    '''


class VersionError(ContainerFormatError):
    pass


class ChecksumError(ContainerFormatError):
    pass


@dataclass
class Container:
    magic: bytes
    kind: str
    metadata: dict = field(default_factory=dict)
    tensors: OrderedDict = field(default_factory=OrderedDict)
    version: int = FORMAT_VERSION


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(',', ':'),
                      ensure_ascii=True)


def _as_storable(name, arr):
    arr = np.asarray(arr)
    if arr.dtype.kind == 'f':
        dtype = DTYPES[0]
    elif arr.dtype.kind in 'iub':
        dtype = DTYPES[1]
    else:
        raise TypeError('tensor {0!r} has unsupported dtype {1}'.format(
            name, arr.dtype))
    return np.asarray(arr, dtype=dtype, order='C')


def to_bytes(container):
    '''
    Function to serialize a Container
    '''

    if len(container.magic) != 4:
        raise ValueError('magic must be 4 bytes')

    # Build the checksummed body
    parts = []
    kind = container.kind.encode('utf-8')
    parts.append(struct.pack('<H', len(kind)) + kind)
    meta = canonical_json(container.metadata).encode('utf-8')
    parts.append(struct.pack('<I', len(meta)) + meta)
    parts.append(struct.pack('<I', len(container.tensors)))
    for name, arr in container.tensors.items():
        arr = _as_storable(name, arr)
        name_b = name.encode('utf-8')
        parts.append(struct.pack('<H', len(name_b)) + name_b)
        parts.append(struct.pack('<BB', DTYPE_CODES[arr.dtype], arr.ndim))
        parts.append(struct.pack('<{0}I'.format(arr.ndim), *arr.shape))
        parts.append(arr.tobytes(order='C'))
    body = b''.join(parts)

    return b''.join([container.magic,
                     struct.pack('<I', container.version),
                     body,
                     struct.pack('<I', zlib.crc32(body) & 0xffffffff)])


class _Reader(object):
    def __init__(self, data):
        self._data = data
        self._pos = 0

    def take(self, size):
        if self._pos + size > len(self._data):
            raise ContainerFormatError('container body is truncated')
        chunk = self._data[self._pos:self._pos + size]
        self._pos += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def at_end(self):
        return self._pos == len(self._data)


def from_bytes(data, expected_magic=None):
    '''
    Function to parse and verify a serialized Container

    Parameters
    ----------
    :type data: bytes
    :param data: file contents
    :type expected_magic: bytes
    :param expected_magic: (optional), default=None
        reject any other magic

    Returns
    -------
    :return: container : Container
    '''

    if len(data) < 12:
        raise ContainerFormatError(
            'file too short to be a container ({0} bytes)'.format(len(data)))

    # Check magic and version before trusting anything else
    magic = bytes(data[:4])
    if magic not in (WEIGHTS_MAGIC, DATASET_MAGIC) or \
            (expected_magic is not None and magic != expected_magic):
        raise ContainerFormatError('unexpected magic {0!r}{1}'.format(
            magic, '' if expected_magic is None
            else ' (expected {0!r})'.format(expected_magic)))
    version, = struct.unpack('<I', data[4:8])
    if version != FORMAT_VERSION:
        raise VersionError('unsupported container version {0} (this build '
                           'reads version {1})'.format(version,
                                                       FORMAT_VERSION))

    body = data[8:-4]
    stored_crc, = struct.unpack('<I', data[-4:])
    actual_crc = zlib.crc32(body) & 0xffffffff
    if stored_crc != actual_crc:
        raise ChecksumError('checksum mismatch: stored {0:08x}, computed '
                            '{1:08x}'.format(stored_crc, actual_crc))

    try:
        reader = _Reader(body)
        kind_len, = reader.unpack('<H')
        kind = reader.take(kind_len).decode('utf-8')
        meta_len, = reader.unpack('<I')
        metadata = json.loads(reader.take(meta_len).decode('utf-8'))
        n_tensors, = reader.unpack('<I')
        tensors = OrderedDict()
        for _ in range(n_tensors):
            name_len, = reader.unpack('<H')
            name = reader.take(name_len).decode('utf-8')
            code, ndim = reader.unpack('<BB')
            if code not in DTYPES:
                raise ContainerFormatError(
                    'tensor {0!r} has unknown dtype code {1}'.format(
                        name, code))
            shape = reader.unpack('<{0}I'.format(ndim))
            dtype = DTYPES[code]
            count = int(np.prod(shape, dtype=np.int64))
            raw = reader.take(count * dtype.itemsize)
            tensors[name] = np.frombuffer(raw, dtype=dtype).reshape(
                shape).copy()
        if not reader.at_end():
            raise ContainerFormatError('trailing bytes after last tensor')
    except (UnicodeDecodeError, ValueError, struct.error) as exc:
        if isinstance(exc, ContainerFormatError):
            raise
        raise ContainerFormatError('malformed container body: {0}'.format(
            exc))

    return Container(magic=magic, kind=kind, metadata=metadata,
                     tensors=tensors, version=version)


def atomic_write_bytes(path, data):
    '''
    Write data to path through a temporary file and a rename
    '''
    path = os.path.abspath(path)
    dirname = os.path.dirname(path)
    if not os.path.exists(dirname):
        os.makedirs(dirname)
    fd, tmp_path = tempfile.mkstemp(dir=dirname, prefix='.tmp-')
    try:
        with os.fdopen(fd, 'wb') as tmp_out:
            tmp_out.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_container(path, container):
    atomic_write_bytes(path, to_bytes(container))


def read_container(path, expected_magic=None):
    with open(path, 'rb') as f_in:
        data = f_in.read()
    return from_bytes(data, expected_magic=expected_magic)


def dataset_to_container(dataset):
    '''
    Function to pack a Dataset into an LKTD container
    '''

    lengths = [len(seq) for seq in dataset.sequences]
    offsets = np.concatenate([[0], np.cumsum(lengths, dtype=np.int64)])
    skill_ids = dataset.skill_vocab.ids
    if dataset.has_no_skill:
        skill_ids = skill_ids[:-1]

    def _cat(attr):
        if not dataset.sequences:
            return np.zeros(0, dtype=np.int32)
        return np.concatenate([getattr(seq, attr)
                               for seq in dataset.sequences])

    tensors = OrderedDict([('offsets', offsets),
                           ('questions', _cat('questions')),
                           ('skills', _cat('skills')),
                           ('correct', _cat('correct'))])
    metadata = {'students': dataset.student_vocab.ids,
                'questions': dataset.question_vocab.ids,
                'skills': skill_ids,
                'has_no_skill': bool(dataset.has_no_skill)}
    return Container(magic=DATASET_MAGIC, kind='dataset', metadata=metadata,
                     tensors=tensors)


def container_to_dataset(container):
    '''
    Function to rebuild a Dataset from an LKTD container
    '''

    if container.magic != DATASET_MAGIC:
        raise ContainerFormatError('not a dataset container: magic '
                                   '{0!r}'.format(container.magic))
    try:
        meta = container.metadata
        skill_vocab = Vocab(meta['skills'])
        if meta['has_no_skill']:
            skill_vocab.add(None)
        offsets = container.tensors['offsets']
        questions = container.tensors['questions']
        skills = container.tensors['skills']
        correct = container.tensors['correct']
    except KeyError as exc:
        raise ContainerFormatError('dataset container is missing {0}'.format(
            exc))
    sequences = tuple(
        Sequence(questions[lo:hi].astype(np.int32),
                 skills[lo:hi].astype(np.int32),
                 correct[lo:hi].astype(np.int32))
        for lo, hi in zip(offsets[:-1], offsets[1:]))
    return Dataset(sequences, Vocab(meta['questions']), skill_vocab,
                   Vocab(meta['students']), bool(meta['has_no_skill']))


def save_dataset(dataset, path):
    write_container(path, dataset_to_container(dataset))


def load_dataset(path):
    return container_to_dataset(read_container(path, DATASET_MAGIC))
