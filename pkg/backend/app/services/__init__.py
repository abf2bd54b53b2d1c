# Services package




