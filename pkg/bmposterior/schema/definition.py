"""
Declarative record definitions.

A `Record` subclass lists typed fields as class attributes. Instances
validate every assignment, fill defaults, and can describe themselves as an
Avro-compatible schema dict. Experiment configs, chain records and run
manifests are all records.

.. code-block:: python

    class Proposal(Record):
        kind = String(default='single', choices=('single', 'full'))
        std = Double(default=0.1, minimum=0.0, exclusive_minimum=True)
"""
import copy
import math
from abc import abstractmethod
from collections import OrderedDict


def _string_representation(x):
    if hasattr(x, "__name__"):
        return x.__name__
    else:
        return str(x)


def _check_record_or_field(x):
    if (type(x) is type and not issubclass(x, Record)) \
            and not isinstance(x, Field):
        raise TypeError('Argument ' + _string_representation(x) + ' is not a Record or a Field')


class RecordMeta(type):
    def __new__(metacls, name, parents, dct):
        if name != 'Record':
            # Do not apply this logic to the base class itself
            fields = OrderedDict()
            for parent in parents:
                fields.update(getattr(parent, '_fields', {}))
            fields.update(RecordMeta._get_fields(dct))
            dct['_fields'] = fields
            dct['_required'] = False
        return type.__new__(metacls, name, parents, dct)

    @classmethod
    def _get_fields(cls, dct):
        # Build a set of valid fields for this record
        fields = OrderedDict()
        for name, value in dct.items():
            if type(value) == RecordMeta:
                # We expect an instance of a record rather than the class itself
                value = value()

            if isinstance(value, Record) or isinstance(value, Field):
                fields[name] = value
        return fields


class Record(metaclass=RecordMeta):

    # Namespace for the Avro record schema
    _avro_namespace = 'bmposterior'

    def __init__(self, default=None, required_default=False, required=False, *args, **kwargs):
        self._required_default = required_default
        self._default = default
        self._required = required

        unknown = set(kwargs) - set(self._fields)
        if unknown:
            raise AttributeError('Unknown field(s) %s for record %s'
                                 % (', '.join(sorted(unknown)), type(self).__name__))

        for k, value in self._fields.items():
            if k in kwargs:
                if isinstance(value, Record) and isinstance(kwargs[k], dict):
                    # Use dict init Record object
                    copied = copy.copy(value)
                    copied.__init__(**kwargs[k])
                    self.__setattr__(k, copied)
                else:
                    # Value was overridden at constructor
                    self.__setattr__(k, kwargs[k])
            elif isinstance(value, Record):
                self.__setattr__(k, copy.copy(value))
            else:
                # Set field to default value, without revalidating the default value type
                super(Record, self).__setattr__(k, copy.copy(value.default()))

    @classmethod
    def schema(cls):
        return cls.schema_info(set())

    @classmethod
    def schema_info(cls, defined_names):
        namespace_name = cls._avro_namespace + '.' + cls.__name__
        if namespace_name in defined_names:
            return namespace_name
        defined_names.add(namespace_name)

        schema = {
            'type': 'record',
            'name': str(cls.__name__),
            'namespace': cls._avro_namespace,
            'fields': [],
        }

        for name, field in cls._fields.items():
            field_type = field.schema_info(defined_names) \
                if field._required else ['null', field.schema_info(defined_names)]
            entry = {'name': name, 'type': field_type}
            if field.required_default():
                entry['default'] = field.default()
            schema['fields'].append(entry)

        return schema

    def __setattr__(self, key, value):
        if key in ('_default', '_required_default', '_required'):
            super(Record, self).__setattr__(key, value)
        else:
            if key not in self._fields:
                raise AttributeError('Cannot set undeclared field ' + key + ' on record')

            # Check that type of value matches the field type
            field = self._fields[key]
            value = field.validate_type(key, value)
            super(Record, self).__setattr__(key, value)

    def __eq__(self, other):
        if type(self) is not type(other):
            return False
        for field in self._fields:
            if self.__getattribute__(field) != other.__getattribute__(field):
                return False
        return True

    def __ne__(self, other):
        return not self.__eq__(other)

    def __str__(self):
        return str(self.to_dict())

    def to_dict(self):
        """
        Plain-Python view of the record: sub-records become dicts, in field
        declaration order.
        """
        out = OrderedDict()
        for name in self._fields:
            out[name] = _plain(getattr(self, name))
        return out

    def type(self):
        return str(self.__class__.__name__)

    def python_type(self):
        return self.__class__

    def validate_type(self, name, val):
        if val is None and not self._required:
            return self.default()

        if not isinstance(val, self.__class__):
            raise TypeError("Invalid type '%s' for sub-record field '%s'. Expected: %s" % (
                type(val), name, _string_representation(self.__class__)))
        return val

    def default(self):
        if self._default is not None:
            return self._default
        else:
            return None

    def required_default(self):
        return self._required_default


def _plain(value):
    if isinstance(value, Record):
        return value.to_dict()
    if isinstance(value, list):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return OrderedDict((k, _plain(v)) for k, v in value.items())
    return value


class Field(object):
    def __init__(self, default=None, required=False, required_default=False):
        if default is not None:
            default = self.validate_type('default', default)
        self._default = default
        self._required_default = required_default
        self._required = required

    @abstractmethod
    def type(self):
        pass

    @abstractmethod
    def python_type(self):
        pass

    def validate_type(self, name, val):
        if val is None and not self._required:
            return self.default()

        if not isinstance(val, self.python_type()):
            raise TypeError("Invalid type '%s' for field '%s'. Expected: %s"
                            % (type(val), name, _string_representation(self.python_type())))
        return val

    def schema(self):
        # For primitive types, the schema would just be the type itself
        return self.type()

    def schema_info(self, defined_names):
        return self.type()

    def default(self):
        return self._default

    def required_default(self):
        return self._required_default


class _Number(Field):
    """Numeric field with optional bounds."""

    def __init__(self, default=None, required=False, required_default=False,
                 minimum=None, maximum=None, exclusive_minimum=False):
        self.minimum = minimum
        self.maximum = maximum
        self.exclusive_minimum = exclusive_minimum
        super(_Number, self).__init__(default, required, required_default)

    def _check_range(self, name, val):
        if self.minimum is not None:
            if val < self.minimum or (self.exclusive_minimum and val == self.minimum):
                raise ValueError("Value %r for field '%s' must be %s %r"
                                 % (val, name, '>' if self.exclusive_minimum else '>=', self.minimum))
        if self.maximum is not None and val > self.maximum:
            raise ValueError("Value %r for field '%s' must be <= %r" % (val, name, self.maximum))
        return val


class Boolean(Field):
    def type(self):
        return 'boolean'

    def python_type(self):
        return bool

    def default(self):
        if self._default is not None:
            return self._default
        else:
            return False


class Integer(_Number):
    def type(self):
        return 'long'

    def python_type(self):
        return int

    def validate_type(self, name, val):
        if val is None and not self._required:
            return self.default()
        if isinstance(val, bool) or not isinstance(val, int):
            raise TypeError("Invalid type '%s' for field '%s'. Expected: int" % (type(val), name))
        return self._check_range(name, int(val))


class Double(_Number):
    def type(self):
        return 'double'

    def python_type(self):
        return float, int

    def validate_type(self, name, val):
        if val is None and not self._required:
            return self.default()
        if isinstance(val, bool) or not isinstance(val, (float, int)):
            raise TypeError("Invalid type '%s' for field '%s'. Expected: float" % (type(val), name))
        val = float(val)
        if not math.isfinite(val):
            raise ValueError("Value %r for field '%s' must be finite" % (val, name))
        return self._check_range(name, val)


class String(Field):
    def __init__(self, default=None, required=False, required_default=False, choices=None):
        self.choices = tuple(choices) if choices is not None else None
        super(String, self).__init__(default, required, required_default)

    def type(self):
        return 'string'

    def python_type(self):
        return str

    def validate_type(self, name, val):
        if val is None and not self._required:
            return self.default()

        if isinstance(val, bytes):
            val = val.decode()
        if not isinstance(val, str):
            raise TypeError("Invalid type '%s' for field '%s'. Expected a string" % (type(val), name))
        if self.choices is not None and val not in self.choices:
            raise ValueError("Invalid value '%s' for field '%s'. Expected one of: %s"
                             % (val, name, ', '.join(self.choices)))
        return val


# Complex types


class Array(Field):
    def __init__(self, array_type, default=None, required=False, required_default=False):
        _check_record_or_field(array_type)
        self.array_type = array_type
        super(Array, self).__init__(default=default, required=required, required_default=required_default)

    def type(self):
        return 'array'

    def python_type(self):
        return list

    def validate_type(self, name, val):
        if val is None:
            return self.default()

        if isinstance(val, tuple):
            val = list(val)
        super(Array, self).validate_type(name, val)
        return [self.array_type.validate_type(name, x) for x in val]

    def schema(self):
        return self.schema_info(set())

    def schema_info(self, defined_names):
        return {
            'type': self.type(),
            'items': self.array_type.schema_info(defined_names) if isinstance(self.array_type, (Array, Map, Record))
                else self.array_type.type()
        }


class Map(Field):
    def __init__(self, value_type, default=None, required=False, required_default=False):
        _check_record_or_field(value_type)
        self.value_type = value_type
        super(Map, self).__init__(default=default, required=required, required_default=required_default)

    def type(self):
        return 'map'

    def python_type(self):
        return dict

    def validate_type(self, name, val):
        if val is None:
            return self.default()

        super(Map, self).validate_type(name, val)

        out = OrderedDict()
        for k, v in val.items():
            if not isinstance(k, str):
                raise TypeError('Map keys for field ' + name + ' should all be strings')
            out[k] = self.value_type.validate_type(name, v)
        return out

    def schema(self):
        return self.schema_info(set())

    def schema_info(self, defined_names):
        return {
            'type': self.type(),
            'values': self.value_type.schema_info(defined_names) if isinstance(self.value_type, (Array, Map, Record))
                else self.value_type.type()
        }
