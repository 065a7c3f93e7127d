from .definition import Record, Field, Boolean, Integer, Double, String, Array, Map

from .schema import Schema, JsonSchema
from .schema_avro import AvroSchema, HAS_AVRO
