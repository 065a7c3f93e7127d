#!/usr/bin/env python3

import io
import json
import logging
from unittest import TestCase, main

import fastavro

from bmposterior.chain import ChainHeader, ChainRecord
from bmposterior.experiments.config import ExperimentConfig
from bmposterior.experiments.output import RunManifest
from bmposterior.schema import *

logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s %(levelname)-5s %(message)s')


class SchemaTest(TestCase):

    def test_simple(self):
        class Step(Record):
            method = String()
            index = Integer()
            tags = Array(String())
            schedule = String(choices=('cyclic', 'full', 'random'))
            accepted = Boolean()
            log_ratio = Double()
            notes = Map(String())

        fastavro.parse_schema(Step.schema())
        self.assertEqual(Step.schema(), {
            "name": "Step",
            "namespace": "bmposterior",
            "type": "record",
            "fields": [
                {"name": "method", "type": ["null", "string"]},
                {"name": "index", "type": ["null", "long"]},
                {"name": "tags", "type": ["null", {"type": "array", "items": "string"}]},
                {"name": "schedule", "type": ["null", "string"]},
                {"name": "accepted", "type": ["null", "boolean"]},
                {"name": "log_ratio", "type": ["null", "double"]},
                {"name": "notes", "type": ["null", {"type": "map", "values": "string"}]},
            ]
        })
        self.assertEqual(Step(schedule='full').schedule, 'full')
        with self.assertRaises(ValueError):
            Step(schedule='sweep')

    def test_type_promotion(self):
        test_cases = [
            (Integer(), 20, 20),
            (Double(), 20, 20.0),
            (Double(), 20.5, 20.5),
            (String(), b"Test text1", "Test text1"),
        ]
        for field, value_from, value_to in test_cases:
            field_value = field.validate_type("test_field", value_from)
            self.assertEqual(value_to, field_value)
            self.assertEqual(type(value_to), type(field_value))

    def test_bool_is_not_a_number(self):
        with self.assertRaises(TypeError):
            Integer().validate_type('n', True)
        with self.assertRaises(TypeError):
            Double().validate_type('x', False)

    def test_ranges(self):
        positive = Double(minimum=0.0, exclusive_minimum=True)
        self.assertEqual(positive.validate_type('x', 0.5), 0.5)
        with self.assertRaises(ValueError):
            positive.validate_type('x', 0.0)
        fraction = Double(minimum=0.0, maximum=1.0)
        self.assertEqual(fraction.validate_type('x', 0), 0.0)
        with self.assertRaises(ValueError):
            fraction.validate_type('x', 1.5)
        with self.assertRaises(ValueError):
            Double().validate_type('x', float('nan'))
        with self.assertRaises(ValueError):
            Integer(minimum=1).validate_type('n', 0)

    def test_choices(self):
        field = String(choices=('jsonl', 'avro'))
        self.assertEqual(field.validate_type('f', 'avro'), 'avro')
        with self.assertRaises(ValueError):
            field.validate_type('f', 'parquet')

    def test_complex(self):
        class Proposal(Record):
            std = Double()
            kind = String()

        class Example(Record):
            method = String()
            proposal = Proposal  # class
            fallback = Proposal()  # instance

        fastavro.parse_schema(Example.schema())
        self.assertEqual(Example.schema(), {
            "name": "Example",
            "namespace": "bmposterior",
            "type": "record",
            "fields": [
                {"name": "method", "type": ["null", "string"]},
                {"name": "proposal",
                 "type": ["null", {
                     "name": "Proposal",
                     "namespace": "bmposterior",
                     "type": "record",
                     "fields": [
                         {"name": "std", "type": ["null", "double"]},
                         {"name": "kind", "type": ["null", "string"]},
                     ]
                 }]
                 },
                {"name": "fallback",
                 "type": ["null", 'bmposterior.Proposal']
                 }
            ]
        })

    def test_complex_with_required_fields(self):
        class ChainStep(Record):
            index = Integer(required=True)
            note = String()

        class Example(Record):
            method = String(required=True)
            step = ChainStep(required=True)

        self.assertEqual(Example.schema(), {
            "name": "Example",
            "namespace": "bmposterior",
            "type": "record",
            "fields": [
                {"name": "method", "type": "string"},
                {"name": "step",
                 "type": {
                     "name": "ChainStep",
                     "namespace": "bmposterior",
                     "type": "record",
                     "fields": [{"name": "index", "type": "long"},
                                {"name": "note", "type": ["null", "string"]}]
                 }
                 },
            ]
        })

    def test_plain_class_attribute_ignored(self):
        class Color:
            red = 1
            green = 2
            blue = 3

        class Plain(Record):
            a = Integer()
            b = Color

        # Not a Field or Record, so not a field
        self.assertEqual(Plain.schema(),
                         {'name': 'Plain', 'namespace': 'bmposterior', 'type': 'record',
                          'fields': [{'name': 'a', 'type': ['null', 'long']}]})

    def test_initialization(self):
        class Example(Record):
            a = Integer()
            b = Integer()

        r = Example(a=1, b=2)
        self.assertEqual(r.a, 1)
        self.assertEqual(r.b, 2)

        r.b = 5
        self.assertEqual(r.b, 5)

        # Setting non-declared field should fail
        with self.assertRaises(AttributeError):
            r.c = 3

        with self.assertRaises(AttributeError):
            Example(a=1, c=8)

        with self.assertRaises(TypeError):
            Example(a=1, b="hello")

    def test_field_type_check(self):
        class Example(Record):
            a = Integer()
            b = String(required=False)

        self.assertRaises(TypeError, Example, a=1, b=2)

        class E3(Record):
            a = Array(Integer())

        E3(a=[1, 2, 3])
        self.assertRaises(TypeError, E3, a=[1, 2, "a"])

        class E4(Record):
            a = Map(Double())

        E4(a={'a': 1, 'b': 2.5})
        self.assertRaises(TypeError, E4, a={'a': "x"})
        self.assertRaises(TypeError, E4, a={1: 1.0})

    def test_defaults(self):
        class Example(Record):
            a = Integer(default=5)
            b = Boolean(default=True)
            c = String(default='hello')
            d = Array(Integer(), default=[1, 2])

        r = Example()
        self.assertEqual(r.a, 5)
        self.assertEqual(r.b, True)
        self.assertEqual(r.c, 'hello')
        self.assertEqual(r.d, [1, 2])
        # Defaults are copied per instance
        r.d.append(3)
        self.assertEqual(Example().d, [1, 2])

    def test_nested_record_from_dict(self):
        class Inner(Record):
            x = Integer()

        class Outer(Record):
            inner = Inner()
            name = String()

        r = Outer(inner={'x': 4}, name='n')
        self.assertEqual(r.inner.x, 4)
        self.assertEqual(r.to_dict(), {'inner': {'x': 4}, 'name': 'n'})

    def test_json_schema(self):
        class Example(Record):
            a = Integer()
            b = Double()
            c = Array(String())

        s = JsonSchema(Example)
        r = Example(a=1, b=2.5, c=['x', 'y'])
        data = s.encode(r)
        self.assertEqual(data, b'{"a":1,"b":2.5,"c":["x","y"]}')
        self.assertEqual(s.decode(data), r)
        self.assertEqual(json.loads(s.schema_info()), Example.schema())

        with self.assertRaises(TypeError):
            s.encode('not a record')

    def test_json_schema_indent(self):
        class Example(Record):
            a = Integer()

        self.assertEqual(JsonSchema(Example, indent=2).encode(Example(a=1)), b'{\n  "a": 1\n}')

    def test_avro_schema(self):
        class Example(Record):
            a = Integer()
            b = Double()
            c = Array(Double())
            d = Map(String())

        s = AvroSchema(Example)
        r = Example(a=3, b=0.25, c=[1.0, -2.0], d={'k': 'v'})
        self.assertEqual(s.decode(s.encode(r)), r)

    def test_avro_container_is_deterministic(self):
        class Example(Record):
            a = Integer()

        s = AvroSchema(Example)
        outputs = []
        for _ in range(2):
            buffer = io.BytesIO()
            s.write_container(buffer, [Example(a=i) for i in range(5)], {'m': 'x'})
            outputs.append(buffer.getvalue())
        self.assertEqual(outputs[0], outputs[1])
        read = list(s.read_container(io.BytesIO(outputs[0])))
        self.assertEqual([r.a for r in read], [0, 1, 2, 3, 4])

    def test_package_records_parse(self):
        for record_cls in (ChainHeader, ChainRecord, ExperimentConfig, RunManifest):
            fastavro.parse_schema(record_cls.schema())

    def test_experiment_config_defaults_survive_avro(self):
        s = AvroSchema(ExperimentConfig)
        config = ExperimentConfig(experiment='heart', seed=4)
        self.assertEqual(s.decode(s.encode(config)), config)


if __name__ == '__main__':
    main()
