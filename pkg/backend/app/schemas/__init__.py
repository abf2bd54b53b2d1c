# Pydantic schemas package




