"""
URL configuration for uweb_project project.

Only the admin is served: command logs and simulation runs are browsed there.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
