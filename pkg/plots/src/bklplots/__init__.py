"""Figures for the oscillator-attrition game engine's artifacts."""

from .figures import (FIGURE_KINDS, FigureSpec, SchemaError, plot_heatmap,
                      plot_polar_actions, plot_scaling, plot_trajectory,
                      render)

__version__ = "0.1.0"
