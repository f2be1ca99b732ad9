# Renormalization lab package
