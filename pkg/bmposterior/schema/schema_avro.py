import hashlib
import io
import logging

from .definition import Record
from .schema import Schema, _serialized_value

try:
    import fastavro
    HAS_AVRO = True
except ImportError:
    HAS_AVRO = False

_logger = logging.getLogger(__name__)

if HAS_AVRO:
    class AvroSchema(Schema):
        def __init__(self, record_cls, schema_definition=None):
            if record_cls is None and schema_definition is None:
                raise AssertionError("The param record_cls and schema_definition shouldn't be both None.")

            if record_cls is not None:
                self._schema = record_cls.schema()
            else:
                self._schema = schema_definition
            self._parsed = fastavro.parse_schema(self._schema)
            super(AvroSchema, self).__init__(record_cls, self._schema, 'AVRO')

        def _encode_value(self, x):
            if isinstance(x, Record):
                return self.encode_dict(x.to_dict())
            elif isinstance(x, list):
                return [self._encode_value(item) for item in x]
            elif isinstance(x, dict):
                return self.encode_dict(x)
            elif isinstance(x, (str, bool, int, float)) or x is None:
                return x
            return _serialized_value(x)

        def encode_dict(self, d):
            return {k: self._encode_value(v) for k, v in d.items()}

        def encode(self, obj):
            buffer = io.BytesIO()
            m = obj
            if self._record_cls is not None:
                self._validate_object_type(obj)
                m = self.encode_dict(obj.to_dict())
            elif not isinstance(obj, dict):
                raise ValueError('If using the custom schema, the record data should be dict type.')

            fastavro.schemaless_writer(buffer, self._parsed, m)
            return buffer.getvalue()

        def decode(self, data):
            d = fastavro.schemaless_reader(io.BytesIO(data), self._parsed)
            if self._record_cls is not None:
                return self._record_cls(**d)
            return d

        def write_container(self, fo, objs, metadata=None):
            """
            Write records into an Avro object container file. The sync marker
            is derived from the metadata so identical input gives identical bytes.
            """
            metadata = dict(metadata or {})
            marker = hashlib.sha256(repr(sorted(metadata.items())).encode()).digest()[:16]
            records = (self.encode_dict(o.to_dict()) if isinstance(o, Record) else o for o in objs)
            fastavro.writer(fo, self._parsed, records, metadata=metadata, sync_marker=marker)
            _logger.debug('Wrote Avro container with schema %s', self._schema.get('name'))

        def read_container(self, fo):
            for d in fastavro.reader(fo):
                yield self._record_cls(**d) if self._record_cls is not None else d

else:
    class AvroSchema(Schema):
        def __init__(self, _record_cls, _schema_definition=None):
            raise Exception("Avro library support was not found. Make sure to install bmposterior " +
                            "with Avro support: pip3 install 'bmposterior[avro]'")

        def encode(self, obj):
            pass

        def decode(self, data):
            pass
