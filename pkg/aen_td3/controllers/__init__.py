"""Controller registry and initialization."""

from .base import (
    Controller,
    create_controller,
    get_controller_class,
    list_modes,
    register_controller,
)
from .centralized import CentralizedController
from .decentralized import DecentralizedController
from .scripted import ScriptedPartnerController


# Register all available controllers
def initialize_controllers():
    """Initialize and register all controllers."""
    register_controller("centralized_td3", CentralizedController)
    register_controller("decentralized_aen_td3", DecentralizedController)
    register_controller("scripted_partner", ScriptedPartnerController)

# Auto-initialize when module is imported
initialize_controllers()

__all__ = [
    "Controller",
    "create_controller",
    "get_controller_class",
    "list_modes",
    "register_controller",
    "CentralizedController",
    "DecentralizedController",
    "ScriptedPartnerController",
]
