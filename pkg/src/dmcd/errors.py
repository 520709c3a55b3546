"""Exception hierarchy.

Errors are grouped into four families (config, data, provider, validation);
the CLI maps each family to its own exit code.
"""


class DmcdError(Exception):
    exit_code = 1


class ConfigError(DmcdError):
    exit_code = 2


class DataError(DmcdError):
    exit_code = 3


class ProviderError(DmcdError):
    exit_code = 4


class ValidationError(DmcdError):
    exit_code = 5


# graph
class CycleDetected(ValidationError):
    pass


class UnknownEndpoint(ValidationError):
    pass


class DuplicateNode(ValidationError):
    pass


class InvalidQuery(ValidationError):
    pass


class AdjacentPair(ValidationError):
    pass


class UnknownNode(ValidationError):
    pass


class SchemaError(ValidationError):
    pass


class NodeMismatch(ValidationError):
    pass


# drafting
class UnknownVariable(ValidationError):
    pass


class IsolatedNode(ValidationError):
    pass


class NodeSetChanged(ValidationError):
    pass


class NoDiscrepancies(ValidationError):
    pass


class EmptyMetadata(ValidationError):
    pass


# evaluation
class EmptyList(ValidationError):
    pass


class MixedBoundedFlags(ValidationError):
    pass


# data
class HeaderMismatch(DataError):
    pass


class ParseError(DataError):
    pass


class EmptyTable(DataError):
    pass


class EmptyColumn(DataError):
    pass


class InvalidSpec(DataError):
    pass


class NodeNotInDataset(DataError):
    pass


class InsufficientSamples(DataError):
    pass


class EmptyBatch(DataError):
    pass


# provider
class AuthError(ProviderError):
    pass


class ProviderTimeout(ProviderError):
    pass


class RateLimited(ProviderError):
    pass


class MalformedResponseBody(ProviderError):
    pass


class MockMissError(ProviderError):
    pass


class IoError(DataError):
    pass
