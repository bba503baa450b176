"""Declarative, validating fields for run configurations.

A run configuration is a JSON document. Its layout is declared with the fields
in this module, the way :class:`kerninv.config.RunConfig` does::

    DictField({
        'gamma': FloatField(min_val=0.0, exclusive_min=True, default=1e-3),
        'seed': IntegerField(min_val=0, default=0),
    })

Every field checks a value with ``validate(value, path)``, which returns the
normalized value or raises :class:`ValidationError` naming the offending path
(e.g. ``kernels.x.bandwidth``). :class:`DictField` keeps going after a bad
entry, so a single error lists every problem in a document.

A secondary use of fields is to generate random legal values with
``gen_value``, which the tests use to fuzz the validation.

"""

import copy
import random

from fauxfactory import gen_alpha, gen_boolean, gen_choice, gen_integer

# A sentinel object, used when `None` does not suffice.
_SENTINEL = object()


class ValidationError(ValueError):
    """Indicates that one or more values do not match their fields.

    :param problems: A list of ``(path, message)`` tuples.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__('; '.join(f'{path}: {message}' for path, message in self.problems))

    @property
    def paths(self):
        """Return the offending paths."""
        return [path for path, _ in self.problems]


def _join(path, key):
    """Return the dotted path of ``key`` below ``path``."""
    return f'{path}.{key}' if path else str(key)


class Field:
    """Base class to implement other fields.

    :param required: A boolean. Whether the value must be present.
    :param choices: A tuple of values that this field may be populated with.
    :param default: Used when the value is absent.
    :param nullable: A boolean. Whether ``None`` is a legal value.
    """

    def __init__(self, required=False, choices=None, default=_SENTINEL, nullable=False):
        self.required = required
        self.nullable = nullable
        if choices is not None:
            self.choices = choices
        if default is not _SENTINEL:
            self.default = default

    def validate(self, value, path=''):
        """Check ``value`` and return it, normalized.

        :raises kerninv.config_fields.ValidationError: If the value is illegal.
        """
        if value is None and self.nullable:
            return None
        value = self._check(value, path)
        if hasattr(self, 'choices') and value not in self.choices:
            raise ValidationError([(path, f'{value!r} is not one of {tuple(self.choices)}')])
        return value

    def _check(self, value, path):
        """Check the type and range of ``value``. Overridden by subclasses."""
        return value

    def gen_value(self):
        """Return a random legal value."""
        if hasattr(self, 'choices'):
            return gen_choice(self.choices)
        if hasattr(self, 'default'):
            return self.default
        return None


class BooleanField(Field):
    """Field that represents a boolean."""

    def _check(self, value, path):
        if not isinstance(value, bool):
            raise ValidationError([(path, f'expected a boolean, got {value!r}')])
        return value

    def gen_value(self):
        """Return a value suitable for a :class:`BooleanField`."""
        return gen_boolean()


class FloatField(Field):
    """Field that represents a float in an optional range.

    :param min_val: Lower bound, or ``None``.
    :param max_val: Upper bound, or ``None``.
    :param exclusive_min: Whether ``min_val`` itself is illegal.
    """

    def __init__(self, min_val=None, max_val=None, exclusive_min=False, *args, **kwargs):
        self.min_val = min_val
        self.max_val = max_val
        self.exclusive_min = exclusive_min
        super().__init__(*args, **kwargs)

    def _check(self, value, path):
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise ValidationError([(path, f'expected a number, got {value!r}')])
        value = float(value)
        if value != value or value in (float('inf'), float('-inf')):
            raise ValidationError([(path, f'expected a finite number, got {value!r}')])
        if self.min_val is not None:
            too_small = value <= self.min_val if self.exclusive_min else value < self.min_val
            if too_small:
                relation = '>' if self.exclusive_min else '>='
                raise ValidationError([(path, f'must be {relation} {self.min_val}, got {value}')])
        if self.max_val is not None and value > self.max_val:
            raise ValidationError([(path, f'must be <= {self.max_val}, got {value}')])
        return value

    def gen_value(self):
        """Return a value suitable for a :class:`FloatField`."""
        low = 0.0 if self.min_val is None else self.min_val
        high = low + 10000.0 if self.max_val is None else self.max_val
        value = random.uniform(low, high)
        if self.exclusive_min and value <= low:
            value = (low + high) / 2.0
        return value


class IntegerField(Field):
    """Field that represents an integer in an optional range."""

    def __init__(self, min_val=None, max_val=None, *args, **kwargs):
        self.min_val = min_val
        self.max_val = max_val
        super().__init__(*args, **kwargs)

    def _check(self, value, path):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError([(path, f'expected an integer, got {value!r}')])
        if self.min_val is not None and value < self.min_val:
            raise ValidationError([(path, f'must be >= {self.min_val}, got {value}')])
        if self.max_val is not None and value > self.max_val:
            raise ValidationError([(path, f'must be <= {self.max_val}, got {value}')])
        return value

    def gen_value(self):
        """Return a value suitable for a :class:`IntegerField`."""
        return gen_integer(self.min_val, self.max_val)


class StringField(Field):
    """Field that represents a string."""

    def _check(self, value, path):
        if not isinstance(value, str):
            raise ValidationError([(path, f'expected a string, got {value!r}')])
        return value

    def gen_value(self):
        """Return a value suitable for a :class:`StringField`."""
        if hasattr(self, 'choices'):
            return gen_choice(self.choices)
        return gen_alpha()


class ListField(Field):
    """Field that represents a list whose items share a field.

    :param item: The :class:`Field` of every item.
    :param min_len: The minimum number of items.
    :param max_len: The maximum number of items, or ``None``.
    """

    def __init__(self, item, min_len=0, max_len=None, *args, **kwargs):
        self.item = item
        self.min_len = min_len
        self.max_len = max_len
        super().__init__(*args, **kwargs)

    def _check(self, value, path):
        if not isinstance(value, list | tuple):
            raise ValidationError([(path, f'expected a list, got {value!r}')])
        if len(value) < self.min_len or (self.max_len is not None and len(value) > self.max_len):
            raise ValidationError([(path, f'has {len(value)} items')])
        problems = []
        items = []
        for index, item in enumerate(value):
            try:
                items.append(self.item.validate(item, f'{path}[{index}]'))
            except ValidationError as err:
                problems.extend(err.problems)
        if problems:
            raise ValidationError(problems)
        return items

    def gen_value(self):
        """Return a value suitable for a :class:`ListField`."""
        high = self.min_len + 3 if self.max_len is None else self.max_len
        return [self.item.gen_value() for _ in range(gen_integer(self.min_len, high))]


class OneOfField(Field):
    """Field whose value must match at least one of several fields.

    The first field that accepts the value normalizes it.
    """

    def __init__(self, fields, *args, **kwargs):
        self.fields = tuple(fields)
        super().__init__(*args, **kwargs)

    def _check(self, value, path):
        messages = []
        for field in self.fields:
            try:
                return field.validate(value, path)
            except ValidationError as err:
                messages.extend(message for _, message in err.problems)
        raise ValidationError([(path, ' or '.join(messages))])

    def gen_value(self):
        """Return a value suitable for one of the alternatives."""
        return gen_choice(self.fields).gen_value()


class DictField(Field):
    """Field that represents a JSON object with declared keys.

    Missing keys take their field's default; missing required keys and unknown
    keys are errors.

    :param fields: A dict mapping keys to fields.
    """

    def __init__(self, fields, *args, **kwargs):
        self.fields = dict(fields)
        super().__init__(*args, **kwargs)

    def _check(self, value, path):
        if not isinstance(value, dict):
            raise ValidationError([(path, f'expected an object, got {value!r}')])
        problems = [
            (_join(path, key), 'unknown key') for key in value if key not in self.fields
        ]
        result = {}
        for key, field in self.fields.items():
            if key not in value:
                if field.required:
                    problems.append((_join(path, key), 'is required'))
                elif hasattr(field, 'default'):
                    result[key] = field.validate(copy.deepcopy(field.default), _join(path, key))
                continue
            try:
                result[key] = field.validate(value[key], _join(path, key))
            except ValidationError as err:
                problems.extend(err.problems)
        if problems:
            raise ValidationError(problems)
        return result

    def gen_value(self):
        """Return a value suitable for a :class:`DictField`."""
        return {key: field.gen_value() for key, field in self.fields.items()}
