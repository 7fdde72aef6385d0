from django.urls import path

from . import views

app_name = 'api'

urlpatterns = [
    # =============================================================================
    # RUN REGISTRY
    # =============================================================================
    path('runs/', views.RunListView.as_view(), name='run_list'),
    path('runs/<int:pk>/', views.RunDetailView.as_view(), name='run_detail'),

    # =============================================================================
    # MODEL PRESETS AND CONFIGS
    # =============================================================================
    path('presets/', views.PresetListView.as_view(), name='preset_list'),
    path('configs/validate/', views.ConfigValidateView.as_view(), name='config_validate'),
]
