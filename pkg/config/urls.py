"""
URL configuration for the imcverify project.

Only the admin is served; it lists recorded verification runs.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path("admin/", admin.site.urls),
]
