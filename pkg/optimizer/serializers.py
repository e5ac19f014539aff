from rest_framework import serializers


class BoundReportSerializer(serializers.Serializer):
    steps = serializers.IntegerField()
    eta = serializers.FloatField()
    lipschitz = serializers.FloatField()
    identity_violations = serializers.IntegerField()
    bound_violations = serializers.IntegerField()
    max_identity_residual = serializers.FloatField()
    min_bound_slack = serializers.FloatField()
    ok = serializers.BooleanField()


class TraceSummarySerializer(serializers.Serializer):
    policy = serializers.CharField()
    eta = serializers.FloatField()
    steps = serializers.SerializerMethodField()
    loss_increases = serializers.IntegerField()
    initial_recon = serializers.FloatField(allow_null=True)
    final_recon = serializers.FloatField(allow_null=True)

    def get_steps(self, trace):
        return len(trace)
