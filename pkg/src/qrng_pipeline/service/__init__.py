"""HTTP service layer: pydantic schemas, runners, and the FastAPI app."""
