"""Exception types shared across the toolkit."""


class RvsError(Exception):
    """Base class for all toolkit errors."""


# geodesy
class CoincidentPoints(RvsError):
    """Bearing is undefined for two coincident points."""


# cell grid
class InvalidLevel(RvsError):
    """Cell level outside [0, 30]."""


class LevelUnderflow(RvsError):
    """Operation needs a deeper cell (e.g. parent of a face cell)."""


class LevelOverflow(RvsError):
    """Operation would exceed the maximum level."""


# map ingestion / graph
class UnreadableExtract(RvsError):
    """Input file is not a readable OSM XML or PBF extract."""


class EmptyRegion(RvsError):
    """Region contains no streets after ingestion."""


class NoStreets(RvsError):
    """Graph construction requires at least one street."""


class NodeNotInGraph(RvsError):
    """Node id is not part of the graph."""


class NoPath(RvsError):
    """No path exists between the two nodes."""


# world graph / embeddings / quantization
class EmptyMapGraph(RvsError):
    """World graph construction requires a non-empty map graph."""


class EmptyCorpus(RvsError):
    """Embedding training requires a non-empty walk corpus."""


class KTooLarge(RvsError):
    """Requested more clusters than there are vectors."""


# dataset / records
class MalformedRecord(RvsError):
    """Dataset line failed validation."""

    def __init__(self, line_no, reason):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class UnknownCity(MalformedRecord):
    """Dataset line names a city outside the supported set."""


class ExhaustedSampling(RvsError):
    """Rejection sampling hit its retry budget."""


class OutOfRegion(RvsError):
    """Point lies outside the region grid."""


class OutOfGrid(RvsError):
    """Axis position lies outside the region grid."""


class MissingTokens(RvsError):
    """No token assignment for a required graph node."""


class ParseFailure(RvsError):
    """Prediction text contains no axis pair."""


# scoring
class MissingPrediction(RvsError):
    """One or more gold ids have no prediction."""

    def __init__(self, ids):
        super().__init__(f"missing predictions for {len(ids)} ids: {sorted(ids)[:10]}")
        self.ids = sorted(ids)


class DuplicatePrediction(RvsError):
    """An id occurs more than once in a prediction set."""


class DegenerateGroups(RvsError):
    """ANOVA needs at least two groups with at least two values each."""
