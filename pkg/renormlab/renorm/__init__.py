# Renormalization operator and cascades
