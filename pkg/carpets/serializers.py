from rest_framework import serializers


# ====================================================================
# CONFIG SCHEMA SERIALIZERS
# ====================================================================

class CellSerializer(serializers.Serializer):
    """One cell of a row: width a_ijk and left edge c_ijk"""
    width = serializers.FloatField()
    x_offset = serializers.FloatField()


class RowSerializer(serializers.Serializer):
    """One row of a map: height b_ij, bottom edge d_ij and its cells"""
    height = serializers.FloatField()
    y_offset = serializers.FloatField()
    cells = CellSerializer(many=True, allow_empty=False)


class MapField(serializers.ListField):
    """A carpet map is written as a bare list of rows"""
    child = RowSerializer()

    def __init__(self, **kwargs):
        kwargs.setdefault('allow_empty', False)
        super().__init__(**kwargs)


class CarpetSystemSerializer(serializers.Serializer):
    """
    Top-level config document.

    maps:      list of maps; each map is a list of rows
    env_probs: one probability per map
    """
    maps = serializers.ListField(child=MapField(), allow_empty=False)
    env_probs = serializers.ListField(child=serializers.FloatField(), allow_empty=False)

    def validate(self, attrs):
        if len(attrs['maps']) != len(attrs['env_probs']):
            raise serializers.ValidationError(
                f"env_probs has {len(attrs['env_probs'])} entries for {len(attrs['maps'])} maps"
            )
        return attrs


# ====================================================================
# REPORT SCHEMA SERIALIZERS
# ====================================================================

class RunReportSerializer(serializers.Serializer):
    """Machine-readable report written by every subcommand (--out)"""
    command = serializers.CharField()
    inputs = serializers.DictField()
    results = serializers.DictField()
    warnings = serializers.ListField(child=serializers.CharField(), allow_empty=True)
    timings = serializers.DictField(child=serializers.FloatField())
    seed = serializers.IntegerField(allow_null=True, min_value=0)


# Result keys per subcommand, documented by `manage.py schema`
RESULT_KEYS = {
    'validate': ['ok', 'violations', 'overlaps', 'generic', 'robust1', 'robust2'],
    'dim': [
        'dimension', 'lambda', 't', 'method', 't_under', 't_over', 'agreement_gap', 'P_star',
        'structural_dimension', 'generic_dimension', 'hypotheses',
    ],
    'bounds': ['t_under', 't_over'],
    'percolation': [
        'closed_form', 'dimension', 'gap', 'maps', 'optimal_P_max_error', 'optimal_P', 'method',
        't_under', 't_over', 'agreement_gap',
    ],
    'sample': ['lambda_plus_t', 't', 'checkpoints', 'median', 'per_path'],
    # records: one {depth, x, y, w, h, log_w, log_h} per rectangle
    'approx': ['depth', 'count', 'truncated', 'render', 'environment', 'records'],
    'boxcount': ['slope', 'r2', 'scales', 'counts', 'rectangles', 'truncated'],
    'schema': ['report', 'result_keys'],
}
