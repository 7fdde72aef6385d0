from django.utils.translation import gettext_lazy as _
from django.conf import settings


def get_navigation_for_user(request):
    """Sidebar navigation of the run registry admin"""
    return [
        {
            "title": _("Dashboard"),
            "separator": True,
            "items": [
                {
                    "title": _("Dashboard"),
                    "icon": "dashboard",
                    "link": "/admin/",
                },
            ],
        },
        {
            "title": _("Simulation Runs"),
            "separator": True,
            "collapsible": True,
            "items": [
                {
                    "title": _("All Runs"),
                    "icon": "science",
                    "link": "/admin/runs/simulationrun/",
                },
                {
                    "title": _("Failed Runs"),
                    "icon": "error",
                    "link": "/admin/runs/simulationrun/?status__exact=failed",
                },
            ],
        },
    ]


UNFOLD = {
    "SITE_TITLE": "NV Cavity Simulations",
    "SITE_HEADER": "NV Cavity Run Registry",
    "SITE_URL": "/",
    "SHOW_HISTORY": True,
    "SHOW_VIEW_ON_SITE": False,
    "ENVIRONMENT": "config.unfold_admin.environment_callback",
    "COLORS": {
        "primary": {
            "50": "#f5f3ff",
            "100": "#ede9fe",
            "200": "#ddd6fe",
            "300": "#c4b5fd",
            "400": "#a78bfa",
            "500": "#8b5cf6",
            "600": "#7c3aed",
            "700": "#6d28d9",
            "800": "#5b21b6",
            "900": "#4c1d95",
        },
    },

    "SIDEBAR": {
        "show_search": True,
        "show_all_applications": False,
        "navigation": get_navigation_for_user,
    },

    "THEME": "light",
}


def environment_callback(request):
    """Show environment indicator"""
    return ["Development", "success"] if settings.DEBUG else ["Production", "danger"]
