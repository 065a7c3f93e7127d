from abc import abstractmethod
import json

import numpy as np

from .definition import Record


class Schema(object):
    def __init__(self, record_cls, schema_definition, schema_name):
        self._record_cls = record_cls
        self._schema_definition = schema_definition
        self._schema_name = schema_name

    @abstractmethod
    def encode(self, obj):
        pass

    @abstractmethod
    def decode(self, data):
        pass

    def schema_info(self):
        """
        Returns the JSON text of the schema definition.
        """
        return json.dumps(self._schema_definition, indent=True)

    def _validate_object_type(self, obj):
        if not isinstance(obj, self._record_cls):
            raise TypeError('Invalid record obj of type ' + str(type(obj))
                            + ' - expected type is ' + str(self._record_cls))


def _serialized_value(o):
    if isinstance(o, Record):
        return o.to_dict()
    elif isinstance(o, bytes):
        return o.decode()
    elif isinstance(o, np.integer):
        return int(o)
    elif isinstance(o, np.floating):
        return float(o)
    elif isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError('Object of type %s is not JSON serializable' % type(o).__name__)


class JsonSchema(Schema):
    """
    JSON codec for records.

    With ``indent=None`` (the default) each record encodes to a single line,
    which is what the JSON-lines chain files use. Field order follows the
    record declaration, so equal records always encode to equal bytes.
    """

    def __init__(self, record_cls, indent=None):
        super(JsonSchema, self).__init__(record_cls, record_cls.schema(), 'JSON')
        self._indent = indent

    def encode(self, obj):
        self._validate_object_type(obj)
        separators = (',', ':') if self._indent is None else None
        return json.dumps(obj.to_dict(), default=_serialized_value, indent=self._indent,
                          separators=separators, allow_nan=False).encode('utf-8')

    def decode(self, data):
        if isinstance(data, bytes):
            data = data.decode('utf-8')
        return self._record_cls(**json.loads(data))
