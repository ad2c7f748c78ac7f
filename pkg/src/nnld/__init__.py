"""Neuron with nonlinear dendrites trained by morphological learning."""
