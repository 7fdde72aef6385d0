import logging

import django_filters
from django.http import Http404
from django.shortcuts import get_object_or_404
from rest_framework import status
from rest_framework.exceptions import NotFound, PermissionDenied, ValidationError
from rest_framework.pagination import PageNumberPagination
from rest_framework.parsers import JSONParser
from rest_framework.permissions import AllowAny
from rest_framework.response import Response
from rest_framework.views import APIView

from core.exceptions import SimulationError
from emitters.presets import list_presets

from ..config import RunConfig
from ..models import SimulationRun
from .serializers import PresetSerializer, SimulationRunDetailSerializer, SimulationRunSerializer

logger = logging.getLogger(__name__)


# =============================================================================
# Base Utilities
# =============================================================================

class DefaultPagination(PageNumberPagination):
    page_size = 20
    page_size_query_param = "page_size"
    max_page_size = 100


class BaseAPIView(APIView):
    """Read-only API base with the success/errors envelope"""
    permission_classes = [AllowAny]
    parser_classes = [JSONParser]
    pagination_class = DefaultPagination

    def handle_exception(self, exc):
        if isinstance(exc, (NotFound, Http404)):
            return self.fail(
                errors={'detail': str(exc)},
                message='Resource not found',
                status_code=status.HTTP_404_NOT_FOUND
            )
        elif isinstance(exc, PermissionDenied):
            return self.fail(
                errors={'detail': str(exc)},
                message='Permission denied',
                status_code=status.HTTP_403_FORBIDDEN
            )
        elif isinstance(exc, ValidationError):
            return self.fail(
                errors=exc.detail if hasattr(exc, 'detail') else str(exc),
                message='Validation error',
                status_code=status.HTTP_400_BAD_REQUEST
            )
        elif isinstance(exc, SimulationError):
            return self.fail(
                errors=exc.as_payload(),
                message=exc.message,
                status_code=status.HTTP_400_BAD_REQUEST
            )
        else:
            logger.exception(f"Unexpected error: {exc}")
            return super().handle_exception(exc)

    def ok(self, data=None, message="OK", status_code=status.HTTP_200_OK, **extra):
        payload = {"success": True, "message": message, "data": data}
        if extra:
            payload.update(extra)
        return Response(payload, status=status_code)

    def fail(self, errors=None, message="Error", status_code=status.HTTP_400_BAD_REQUEST, **extra):
        payload = {"success": False, "message": message, "errors": errors or {}}
        if extra:
            payload.update(extra)
        return Response(payload, status=status_code)

    def q(self, request, key, default=None):
        """Get query parameter safely"""
        return request.query_params.get(key, default)

    def paginate(self, request, queryset, serializer_cls):
        try:
            paginator = self.pagination_class()
            page = paginator.paginate_queryset(queryset, request, view=self)
            if page is not None:
                ser = serializer_cls(page, many=True)
                return paginator.get_paginated_response(ser.data)
            ser = serializer_cls(queryset, many=True)
            return Response(ser.data)
        except NotFound:
            raise
        except Exception as e:
            logger.error(f"Pagination error: {e}")
            raise ValidationError("Could not paginate the result")


# =============================================================================
# RUN REGISTRY
# =============================================================================

class RunFilter(django_filters.FilterSet):
    preset = django_filters.CharFilter(lookup_expr='icontains')
    created_after = django_filters.IsoDateTimeFilter(field_name='created_at', lookup_expr='gte')
    created_before = django_filters.IsoDateTimeFilter(field_name='created_at', lookup_expr='lte')

    class Meta:
        model = SimulationRun
        fields = ['command', 'backend', 'status', 'preset']


class RunListView(BaseAPIView):
    """Recorded nvsim runs, newest first"""

    def get(self, request):
        try:
            qs = SimulationRun.objects.all()
            filterset = RunFilter(request.query_params, queryset=qs)
            if not filterset.is_valid():
                return self.fail(filterset.errors, "Invalid filter")
            return self.paginate(request, filterset.qs, SimulationRunSerializer)
        except (ValidationError, NotFound):
            raise
        except Exception as e:
            logger.error(f"Run list error: {e}")
            return self.fail({'detail': str(e)}, "Could not load runs")


class RunDetailView(BaseAPIView):

    def get(self, request, pk):
        run = get_object_or_404(SimulationRun, pk=pk)
        return self.ok(SimulationRunDetailSerializer(run).data)


# =============================================================================
# PRESETS AND CONFIGS
# =============================================================================

class PresetListView(BaseAPIView):

    def get(self, request):
        try:
            scheme = self.q(request, 'scheme')
            items = [item for item in list_presets() if not scheme or item['scheme'] == scheme]
            return self.ok(PresetSerializer(items, many=True).data)
        except Exception as e:
            logger.error(f"Preset list error: {e}")
            return self.fail({'detail': str(e)}, "Could not load presets")


class ConfigValidateView(BaseAPIView):
    """Validate a RunConfig payload and return it resolved"""

    def post(self, request):
        try:
            config = RunConfig.from_dict(request.data)
            spec = config.resolve()
        except SimulationError as e:
            return self.fail(e.errors or {'detail': e.message}, e.message)

        return self.ok(
            {
                'config': config.as_dict(),
                'out': config.out,
                'model': spec.as_dict(),
                'sweep_points': len(config.sweep_values()),
            },
            message="Configuration is valid"
        )
