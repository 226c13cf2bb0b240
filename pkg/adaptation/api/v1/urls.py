from django.urls import path, include
from rest_framework.routers import DefaultRouter
from adaptation.api.v1.views import ExperimentRunViewSet

app_name = 'adaptation_api_v1'

# Create router for API v1
router = DefaultRouter()
router.register(r'', ExperimentRunViewSet, basename='run')

urlpatterns = [
    path('', include(router.urls)),
]
