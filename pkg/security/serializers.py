from rest_framework import serializers


class GoodnessReportSerializer(serializers.Serializer):
    test = serializers.CharField()
    n = serializers.IntegerField()
    statistic = serializers.FloatField()
    p_value = serializers.FloatField(allow_null=True)
    passed = serializers.BooleanField()
    detail = serializers.DictField(required=False)

    def to_representation(self, instance):
        data = super().to_representation(instance)
        data['pass'] = data.pop('passed')
        return data
