# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import csv
import hashlib
import json
import os
import numpy as np

default_output_root = 'gradflow_output'


class ValidationError(ValueError):
    """
    Malformed input: topology, problem file, scenario or method/layout combination.
    """


class DisconnectedGraphError(ValidationError):
    """
    A graph or an induced subgraph is not connected. The message names the components.
    """
    def __init__(self, message, components=(), variable=None):
        super().__init__(message)
        self.components = [sorted(int(node) for node in comp) for comp in components]
        self.variable = variable


class UnsupportedConfigurationError(ValidationError):
    """
    The requested method cannot run on the requested layout.
    """


class NotStrictlyConvexError(ValueError):
    """
    The reduced Hessian is singular or indefinite, no unique optimum or steady state exists.
    """


def canonical_hash(obj, length=10):
    """
    Short SHA-1 digest of the canonical JSON representation of obj.

    :param obj: a JSON-serializable object
    :param length: number of hexadecimal characters to keep
    :return: the digest as a string
    """
    text = json.dumps(obj, sort_keys=True, separators=(',', ':'), default=_to_builtin)
    return hashlib.sha1(text.encode('utf-8')).hexdigest()[:length]


def load_file(file_path):
    """
    Load a JSON or CSV file.

    :param file_path: path of the file. Format supported: .json .csv
    :return: the loaded data and the extension of the file. For CSV files, the data is a tuple (header, values)
     where values is a 2D float array.
    """
    if not os.path.isfile(file_path):
        raise ValidationError('File not found: ' + str(file_path))
    _, extension = os.path.splitext(file_path)
    if extension == '.json':
        with open(file_path, 'r', encoding='utf-8') as f:
            try:
                dataset = json.load(f)
            except json.JSONDecodeError as err:
                raise ValidationError('Malformed JSON in ' + str(file_path) + ': ' + str(err)) from err
    elif extension == '.csv':
        with open(file_path, 'r', newline='', encoding='utf-8') as f:
            reader = csv.reader(f)
            try:
                header = next(reader)
            except StopIteration:
                raise ValidationError('Empty CSV file: ' + str(file_path))
            rows = [row for row in reader if row]
        try:
            values = np.asarray(rows, dtype=float).reshape((len(rows), len(header)))
        except ValueError as err:
            raise ValidationError('Malformed CSV in ' + str(file_path) + ': ' + str(err)) from err
        dataset = (header, values)
    else:
        raise ValidationError("File format not supported: can load only '.json' or '.csv' files")
    return dataset, extension


def output_root(default=default_output_root):
    """
    Root directory for outputs. The environment variable GRADFLOW_OUT overrides the default.

    :param default: default root directory
    :return: the output root directory
    """
    return os.environ.get('GRADFLOW_OUT') or default


def save_csv(file_path, header, values, fmt='%.17g'):
    """
    Save a 2D array of numbers with a header line.

    :param file_path: path of the CSV file
    :param header: list of column names
    :param values: 2D array-like, one row per line
    :param fmt: number format, the default keeps full double precision
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.size and values.shape[1] != len(header):
        raise ValueError('header and values have a different number of columns')
    with open(file_path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in values:
            writer.writerow([fmt % value for value in row])


def save_json(file_path, obj):
    """
    Save obj as an indented JSON file, numpy types are converted to python types.

    :param file_path: path of the JSON file
    :param obj: the object to save
    """
    with open(file_path, 'w', encoding='utf-8') as f:
        json.dump(obj, f, indent=2, sort_keys=True, default=_to_builtin)
        f.write('\n')


def _to_builtin(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError('Object of type ' + type(obj).__name__ + ' is not JSON serializable')
