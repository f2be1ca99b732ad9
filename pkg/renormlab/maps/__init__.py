# Unimodal and Henon-like maps
